use std::path::Path;
use std::process::{Command, Output};

fn wnv(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wnv"))
        .args(args)
        .env_remove("WNV_OUT")
        .current_dir(out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&wnv(&["bogus"], dir.path())), 1);
    assert_eq!(code(&wnv(&["simulate", "--cells", "many"], dir.path())), 1);
    assert_eq!(code(&wnv(&["simulate", "--set", "model.nonsense=1"], dir.path())), 1);
    assert_eq!(code(&wnv(&["simulate", "--set", "model.D1=-3"], dir.path())), 1);
    assert_eq!(code(&wnv(&["simulate", "--config", "missing.cfg"], dir.path())), 1);
    assert_eq!(code(&wnv(&["--help"], dir.path())), 0);
}

#[test]
fn simulate_writes_tables_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let o = wnv(&["simulate", "--h0", "2", "--t-end", "4", "--cells", "80", "--out", "run"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("run");
    let text = std::fs::read_to_string(run.join("boundaries.csv")).unwrap();
    assert!(text.starts_with("t,g,h,gdot,hdot,supU,supV\n"));
    assert!(!text.contains('\r'));
    for f in ["snapshot_0.csv", "snapshot_4.csv", "fronts.svg", "norms.svg", "heatmap.svg"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let snap = std::fs::read_to_string(run.join("snapshot_4.csv")).unwrap();
    assert!(snap.starts_with("x,y,U,V\n"));
}

#[test]
fn output_dir_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wnv"))
        .args(["simulate", "--t-end", "1", "--cells", "40"])
        .env("WNV_OUT", "from_env")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("from_env/boundaries.csv").is_file());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = wnv(&["simulate", "--h0", "1", "--t-end", "3", "--cells", "60", "--out", out], dir.path());
        assert_eq!(code(&o), 0);
    }
    for f in ["boundaries.csv", "snapshot_3.csv", "heatmap.svg"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn failed_verification_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = wnv(&["verify", "--suite", "convergence", "--min-spatial-order", "3", "--out", "v"], dir.path());
    assert_eq!(code(&o), 3);
    let report = std::fs::read_to_string(dir.path().join("v/verify_report.txt")).unwrap();
    assert!(report.contains("FAIL spatial order"));
}

#[test]
fn step_floor_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // A huge first step with a floor equal to it cannot be halved.
    let o = wnv(
        &["simulate", "--t-end", "5", "--set", "solver.dt0=5", "--set", "solver.dt_min=5", "--set", "solver.dt_max=5", "--set", "solver.newton_tol=1e-15", "--set", "solver.max_newton=1"],
        dir.path(),
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn lyapunov_reports_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let o = wnv(
        &["lyapunov", "-L", "3", "--set", "lyapunov.J=64", "--set", "lyapunov.horizon=1000", "--out", "l"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("l/lyapunov.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
}
