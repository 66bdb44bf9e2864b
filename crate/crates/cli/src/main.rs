use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wnv_core::lyapunov::{lambda_of_t, lambda_sweep, lyapunov_exponent, SweepPoint, LambdaSweep};
use wnv_core::output::{write_convergence_csv, write_lambda_series_csv, write_lstar_transcript, write_probe_transcript, write_sweep_csv, write_trajectory_csv};
use wnv_core::plot::{write_plots, write_sweep_plot};
use wnv_core::reproduce::{reproduce, ReproduceOptions};
use wnv_core::thresholds::{dichotomy_check, find_l_star, find_mu_star};
use wnv_core::verify::{
    comparison_suite, default_comparison_cases, manufactured_convergence, mu_monotonicity, spatial_levels,
    spreading_state_probe, stefan_self_convergence, temporal_levels,
};
use wnv_core::{classify, simulate, Check, Error, Report, RunConfig, RunStatus};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "wnv", version, about = "Free-boundary West Nile virus model runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Config file (sectioned key = value)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: $WNV_OUT, then ./out]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set solver.t_end=50`
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    h0: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Solver grid cells
    #[arg(long)]
    cells: Option<usize>,
    /// Use this critical half-width instead of searching for it
    #[arg(long = "l-star")]
    l_star: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the free-boundary system and write CSV and SVG output
    Simulate(Common),
    /// Principal Lyapunov exponent on [-L, L]
    Lyapunov {
        #[command(flatten)]
        common: Common,
        /// Half-width
        #[arg(long = "half-width", short = 'L')]
        half_width: f64,
        /// Spatial shift of the coefficients
        #[arg(long, default_value_t = 0.0)]
        shift: f64,
    },
    /// Exponent over the half-widths of `run.L_list`
    SweepLambda(Common),
    /// Critical half-width from the worst-case exponent over shifts
    FindLstar(Common),
    /// Critical front expansion rate by simulation bisection
    FindMustar(Common),
    /// Simulate and classify as spreading or vanishing
    Classify(Common),
    /// Convergence, comparison, monotonicity and persistence suites
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suites to run (default: all)
        #[arg(long, value_delimiter = ',', value_parser = ["convergence", "comparison", "monotonicity", "persistence"])]
        suite: Vec<String>,
        #[arg(long, default_value_t = 1.9)]
        min_spatial_order: f64,
        #[arg(long, default_value_t = 2.2)]
        max_spatial_order: f64,
        #[arg(long, default_value_t = 0.9)]
        min_temporal_order: f64,
        #[arg(long, default_value_t = 1.1)]
        max_temporal_order: f64,
    },
    /// Reference experiments, threshold searches and summary table
    ReproducePaper(Common),
}

/// Process outcome: exit code plus message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Validation(_) | Error::Parse { .. } => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type Outcome = Result<(), Failure>;

fn load(common: &Common) -> Result<(RunConfig, PathBuf, Option<PathBuf>), Failure> {
    let (mut text, base) = match &common.config {
        Some(path) => (
            std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?,
            path.parent().map(Path::to_path_buf),
        ),
        None => (String::new(), None),
    };
    let mut set = common.set.clone();
    let flags = [
        ("model.h0", common.h0.map(|v| v.to_string())),
        ("model.mu", common.mu.map(|v| v.to_string())),
        ("solver.J", common.cells.map(|v| v.to_string())),
        ("run.l_star", common.l_star.map(|v| v.to_string())),
    ];
    set.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| format!("{k}={v}"))));
    for item in &set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects SECTION.KEY=VALUE, got `{item}`")))?;
        let (section, key) = key
            .split_once('.')
            .ok_or_else(|| usage(format!("--set key must be SECTION.KEY, got `{key}`")))?;
        text.push_str(&format!("\n[{section}]\n{key} = {value}\n"));
    }
    if let Some(t_end) = common.t_end {
        // Output times from the file may lie past a shortened horizon.
        let keep: Vec<String> = RunConfig::parse(&text)
            .map(|c| c.solver.output_times.into_iter().filter(|&t| t <= t_end).map(|t| format!("{t:?}")).collect())
            .unwrap_or_default();
        text.push_str(&format!("\n[solver]\nt_end = {t_end:?}\noutput_times = {}\n", keep.join(", ")));
    }
    let cfg = RunConfig::parse(&text).map_err(|e| {
        let where_ = common
            .config
            .as_ref()
            .map(|p| format!("{}: ", p.display()))
            .unwrap_or_default();
        usage(format!("{where_}{e}"))
    })?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.run.out.clone())
        .or_else(|| std::env::var_os("WNV_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out, base))
}

fn l_star_of(cfg: &RunConfig) -> Result<f64, Failure> {
    if let Some(l) = cfg.run.l_star {
        return Ok(l);
    }
    eprintln!("searching for L* in {:?} (set run.l_star to skip)", cfg.run.l_bracket);
    let found = find_l_star(
        &cfg.model.linearization(),
        cfg.model.diffusivities(),
        cfg.run.l_bracket,
        &cfg.lyapunov.shifts,
        &cfg.lyapunov.estimator,
    )?;
    eprintln!("L* = {}", found.l_star);
    Ok(found.l_star)
}

fn report_outcome(report: &Report, path: &Path) -> Outcome {
    print!("{report}");
    std::fs::write(path, report.to_string()).map_err(|e| Failure::from(Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            message: format!("{} check(s) failed", report.failures().count()),
        })
    }
}

fn cmd_simulate(common: &Common) -> Outcome {
    let (mut cfg, out, base) = load(common)?;
    if cfg.solver.raster_rows == 0 {
        cfg.solver.raster_rows = 300;
    }
    if cfg.solver.output_times.is_empty() {
        cfg.solver = cfg.solver.clone().with_uniform_outputs(cfg.solver.t_end / 4.0);
    }
    let init = cfg.init.initial_data(base.as_deref())?;
    let traj = simulate(&cfg.model, &init, &cfg.solver)?;
    let mut files = write_trajectory_csv(&traj, &out)?;
    files.extend(write_plots(&traj, &out)?);
    let last = traj.last();
    println!(
        "status {} at t = {}: g = {}, h = {}, supU = {:e}, supV = {:e} ({} steps, {} rejected)",
        traj.status.name(),
        last.t,
        last.g,
        last.h,
        last.sup_u,
        last.sup_v,
        traj.accepted_steps,
        traj.rejected_steps
    );
    println!("wrote {} files to {}", files.len(), out.display());
    match traj.status {
        RunStatus::Completed => Ok(()),
        status => Err(Failure {
            code: EXIT_NUMERICAL,
            message: format!("run ended early: {}", status.name()),
        }),
    }
}

fn cmd_lyapunov(common: &Common, half_width: f64, shift: f64) -> Outcome {
    let (cfg, out, _) = load(common)?;
    let mat = cfg.model.linearization().shifted_x(shift);
    let est = lyapunov_exponent(&mat, half_width, cfg.model.diffusivities(), &cfg.lyapunov.estimator)?;
    println!(
        "lambda = {} (CI {:?}, converged {}, {} renormalizations)",
        est.lambda, est.tail_slope_ci, est.converged, est.renorm_count
    );
    let sweep = LambdaSweep {
        points: vec![SweepPoint {
            half_width,
            estimate: est,
        }],
        monotonicity_violations: Vec::new(),
    };
    write_sweep_csv(&sweep, &out.join("lyapunov.csv"))?;
    if est.converged {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_NUMERICAL,
            message: "estimate did not converge; raise lyapunov.horizon".into(),
        })
    }
}

fn cmd_sweep(common: &Common) -> Outcome {
    let (cfg, out, _) = load(common)?;
    let mut ls = cfg.run.l_list.clone();
    ls.sort_by(f64::total_cmp);
    let sweep = lambda_sweep(&cfg.model.linearization(), cfg.model.diffusivities(), &ls, &cfg.lyapunov.estimator)?;
    for p in &sweep.points {
        println!("L = {:<8} lambda = {:+.6} CI {:?}", p.half_width, p.estimate.lambda, p.estimate.tail_slope_ci);
    }
    write_sweep_csv(&sweep, &out.join("sweep.csv"))?;
    write_sweep_plot(&sweep, &out.join("sweep.svg"))?;
    if sweep.is_monotone() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            message: format!("lambda decreases in L at indices {:?}", sweep.monotonicity_violations),
        })
    }
}

fn cmd_find_lstar(common: &Common) -> Outcome {
    let (cfg, out, _) = load(common)?;
    let found = find_l_star(
        &cfg.model.linearization(),
        cfg.model.diffusivities(),
        cfg.run.l_bracket,
        &cfg.lyapunov.shifts,
        &cfg.lyapunov.estimator,
    )?;
    println!(
        "L* = {} (bracket {:?}, {} bisection steps)",
        found.l_star, found.bracket, found.iterations
    );
    write_lstar_transcript(&found.transcript, &out.join("lstar_transcript.csv"))?;
    Ok(())
}

fn cmd_find_mustar(common: &Common) -> Outcome {
    let (cfg, out, base) = load(common)?;
    let init = cfg.init.initial_data(base.as_deref())?;
    let l_star = l_star_of(&cfg)?;
    let found = find_mu_star(&cfg.model, &init, cfg.run.mu_bracket, &cfg.solver, &cfg.run.classify, l_star)?;
    for p in &found.transcript {
        println!("mu = {:<10} {}", p.value, p.verdict);
    }
    println!(
        "mu* = {} (bracket {:?}, {} bisection steps)",
        found.threshold, found.bracket, found.iterations
    );
    write_probe_transcript(&found.transcript, "mu", &out.join("mu_transcript.csv"))?;
    Ok(())
}

fn cmd_classify(common: &Common) -> Outcome {
    let (cfg, out, base) = load(common)?;
    let init = cfg.init.initial_data(base.as_deref())?;
    let l_star = l_star_of(&cfg)?;
    let traj = simulate(&cfg.model, &init, &cfg.solver)?;
    let c = classify(&traj, l_star, &cfg.run.classify);
    let e = &c.evidence;
    println!("verdict {}", c.verdict);
    println!(
        "final width {}, max width {}, bar {}, supU {:e}, supV {:e}, width slope {:e}, norm slope {:e}",
        e.final_width, e.max_width, e.spreading_width_bar, e.final_sup_u, e.final_sup_v, e.width_slope, e.norm_slope
    );
    let series = if c.verdict == wnv_core::Verdict::Spreading {
        let times: Vec<f64> = cfg.run.lambda_times.iter().copied().filter(|&t| t <= traj.last().t).collect();
        lambda_of_t(&cfg.model, &traj, &times, &cfg.lyapunov.estimator)?
    } else {
        Vec::new()
    };
    write_trajectory_csv(&traj, &out)?;
    if !series.is_empty() {
        write_lambda_series_csv(&series, &out.join("lambda_t.csv"))?;
    }
    let report = dichotomy_check(&traj, &c, l_star, &series, 0.1);
    std::fs::create_dir_all(&out).map_err(|e| Failure::from(Error::Io { path: out.clone(), source: e }))?;
    report_outcome(&report, &out.join("classification.txt"))
}

struct OrderBounds {
    spatial: (f64, f64),
    temporal: (f64, f64),
}

fn cmd_verify(common: &Common, suites: &[String], bounds: OrderBounds) -> Outcome {
    let (cfg, out, base) = load(common)?;
    let init = cfg.init.initial_data(base.as_deref())?;
    let wants = |s: &str| suites.is_empty() || suites.iter().any(|x| x == s);
    let mut report = Report::default();
    std::fs::create_dir_all(&out).map_err(|e| Failure::from(Error::Io { path: out.clone(), source: e }))?;
    if wants("convergence") {
        let spatial = manufactured_convergence(&cfg.model, &spatial_levels(40, 3, 0.5), 1.0)?;
        let temporal = manufactured_convergence(&cfg.model, &temporal_levels(800, 0.1, 3), 1.0)?;
        write_convergence_csv(&spatial, &out.join("convergence_space.csv"))?;
        write_convergence_csv(&temporal, &out.join("convergence_time.csv"))?;
        let (p, q) = (spatial.observed_order(), temporal.observed_order());
        report.push(Check::at_least("spatial order >= lower bound", p, bounds.spatial.0));
        report.push(Check::at_most("spatial order <= upper bound", p, bounds.spatial.1));
        report.push(Check::at_least("temporal order >= lower bound", q, bounds.temporal.0));
        report.push(Check::at_most("temporal order <= upper bound", q, bounds.temporal.1));
        let live = stefan_self_convergence(&cfg.model, &init, 50, 0.5, 2.0)?;
        println!(
            "live Stefan coupling: h(2) = {:?} on J = {:?}, observed order {:.3} (no pass bar)",
            live.h_end, live.cells, live.order
        );
    }
    if wants("comparison") {
        let mut solver = cfg.solver.clone();
        solver.t_end = 50.0;
        solver = solver.with_uniform_outputs(1.0);
        let cases = default_comparison_cases(&cfg.model, &init);
        report.extend(comparison_suite(&cfg.model, &cases, &solver, 1e-8)?);
    }
    if wants("monotonicity") {
        let mut solver = cfg.solver.clone();
        solver.t_end = solver.t_end.min(50.0);
        solver = solver.with_uniform_outputs(1.0);
        report.extend(mu_monotonicity(&cfg.model, &init, &cfg.run.mu_list, &solver, 1e-8)?);
        let mut ls = cfg.run.l_list.clone();
        ls.sort_by(f64::total_cmp);
        let sweep = lambda_sweep(&cfg.model.linearization(), cfg.model.diffusivities(), &ls, &cfg.lyapunov.estimator)?;
        write_sweep_csv(&sweep, &out.join("sweep.csv"))?;
        report.push(Check::at_most(
            "lambda nondecreasing in L within CI (violations)",
            sweep.monotonicity_violations.len() as f64,
            0.0,
        ));
    }
    if wants("persistence") {
        let probe = spreading_state_probe(&cfg.model, &init, &cfg.solver)?;
        for p in &probe.probes {
            println!(
                "x = {:<4} floor U {:.4e} floor V {:.4e} best translation {:?} discrepancy {:.3e}",
                p.x, p.floor_u, p.floor_v, p.best_period, p.discrepancy
            );
        }
        report.extend(probe.report);
    }
    report_outcome(&report, &out.join("verify_report.txt"))
}

fn cmd_reproduce(common: &Common) -> Outcome {
    let (cfg, out, base) = load(common)?;
    let init = cfg.init.initial_data(base.as_deref())?;
    let opts = ReproduceOptions {
        solver: cfg.solver.clone(),
        classify: cfg.run.classify.clone(),
        estimator: cfg.lyapunov.estimator.clone(),
        shifts: cfg.lyapunov.shifts.clone(),
        l_bracket: cfg.run.l_bracket,
        l_star: cfg.run.l_star,
        h0_bracket: cfg.run.h0_bracket,
        mu_bracket: cfg.run.mu_bracket,
        lambda_times: cfg.run.lambda_times.clone(),
        vanishing_tolerance: 0.1,
    };
    let summary = reproduce(&cfg.model, &init, &opts)?;
    print!("{}", summary.table());
    summary.write(&out)?;
    if summary.checks.passed() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            message: format!(
                "{} check(s) differ from the reference results; see {}",
                summary.checks.failures().count(),
                out.join("summary.txt").display()
            ),
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Lyapunov {
            common,
            half_width,
            shift,
        } => cmd_lyapunov(common, *half_width, *shift),
        Command::SweepLambda(c) => cmd_sweep(c),
        Command::FindLstar(c) => cmd_find_lstar(c),
        Command::FindMustar(c) => cmd_find_mustar(c),
        Command::Classify(c) => cmd_classify(c),
        Command::Verify {
            common,
            suite,
            min_spatial_order,
            max_spatial_order,
            min_temporal_order,
            max_temporal_order,
        } => cmd_verify(
            common,
            suite,
            OrderBounds {
                spatial: (*min_spatial_order, *max_spatial_order),
                temporal: (*min_temporal_order, *max_temporal_order),
            },
        ),
        Command::ReproducePaper(c) => cmd_reproduce(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
