//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p wnv-core --test acceptance`.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use wnv_core::lyapunov::lambda_sweep;
use wnv_core::output::write_trajectory_csv;
use wnv_core::reproduce::{reproduce, ReproduceOptions, ReproduceSummary, REFERENCE_HALF_WIDTH_INTERVAL, REFERENCE_MU_INTERVAL};
use wnv_core::solver::BoundMode;
use wnv_core::thresholds::transcript_is_monotone;
use wnv_core::verify::{
    comparison_suite, default_comparison_cases, manufactured_convergence, mu_monotonicity, spatial_levels,
    spreading_state_probe, temporal_levels,
};
use wnv_core::{
    classify, default_paper_spec, lyapunov_exponent, simulate, ClassifyConfig, ConstantMatrix, EstimatorConfig,
    InitialData, ModelSpec, RunConfig, SolverConfig, Verdict,
};

struct Gate {
    failed: usize,
    total: usize,
}

impl Gate {
    fn record(&mut self, name: &str, passed: bool, detail: String, started: Instant) {
        self.total += 1;
        if !passed {
            self.failed += 1;
        }
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {detail} [{:.1} s]", started.elapsed().as_secs_f64());
    }
}

fn reference() -> (ModelSpec, InitialData, SolverConfig) {
    let solver = SolverConfig {
        cells: 400,
        t_end: 300.0,
        ..SolverConfig::default()
    };
    (default_paper_spec(), InitialData::default(), solver)
}

/// Largest eigenvalue of `A0 - (pi/2L)^2 diag(D)`, from the characteristic
/// polynomial.
fn principal_eigenvalue(a0: [[f64; 2]; 2], half_width: f64, d: (f64, f64)) -> f64 {
    let k2 = (PI / (2.0 * half_width)).powi(2);
    let p = a0[0][0] - d.0 * k2;
    let q = a0[1][1] - d.1 * k2;
    // lambda^2 - (p + q) lambda + (p q - b c) = 0
    let disc = (p - q).powi(2) + 4.0 * a0[0][1] * a0[1][0];
    0.5 * (p + q + disc.sqrt())
}

fn regimes(gate: &mut Gate, l_star: f64) {
    let started = Instant::now();
    let (spec, init, solver) = reference();
    let cases = [(2.0, 0.1, Verdict::Spreading), (1.0, 0.1, Verdict::Spreading), (0.6, 0.1, Verdict::Vanishing), (0.5, 0.1, Verdict::Vanishing), (0.6, 0.2, Verdict::Spreading)];
    let mut ok = true;
    let mut slowest: f64 = 0.0;
    let mut parts = Vec::new();
    for (h0, mu, expected) in cases {
        let t = Instant::now();
        let traj = simulate(&spec.with_h0(h0).with_mu(mu), &init, &solver).expect("reference run");
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let got = classify(&traj, l_star, &ClassifyConfig::default()).verdict;
        ok &= got == expected;
        parts.push(format!("(h0 {h0}, mu {mu}) {got}/{expected}"));
    }
    ok &= slowest <= 60.0;
    gate.record(
        "spreading/vanishing regimes",
        ok,
        format!("got/expected {}; slowest run {slowest:.2} s, bound 60 s", parts.join(", ")),
        started,
    );
}

fn thresholds(gate: &mut Gate, summary: &ReproduceSummary, started: Instant) {
    let (lo, hi) = REFERENCE_HALF_WIDTH_INTERVAL;
    let h0 = summary.h0_star.as_ref().map(|s| s.threshold);
    let h0_ok = h0.as_ref().is_ok_and(|&v| lo < v && v < hi)
        && summary.h0_star.as_ref().is_ok_and(|s| transcript_is_monotone(&s.transcript));
    gate.record(
        "half-width threshold bracket",
        h0_ok,
        format!(
            "simulated h0* = {h0:?}, lambda-based L* = {:.4}, required in ({lo}, {hi})",
            summary.l_star
        ),
        started,
    );
    let (lo, hi) = REFERENCE_MU_INTERVAL;
    let in_ref = summary.mu_star_reference.as_ref().map(|s| s.threshold);
    let wide = summary.mu_star.as_ref().map(|s| s.threshold);
    let mu_ok = in_ref.as_ref().is_ok_and(|&v| lo < v && v < hi)
        && summary.mu_star_reference.as_ref().is_ok_and(|s| transcript_is_monotone(&s.transcript));
    gate.record(
        "mu threshold bracket",
        mu_ok,
        format!("search in ({lo}, {hi}): {in_ref:?}; wider search: {wide:?}"),
        started,
    );
}

fn lyapunov_oracle(gate: &mut Gate) {
    let started = Instant::now();
    let d = (3.0, 0.125);
    let matrices = [
        [[-0.5, 0.8], [1.2, -0.3]],
        [[0.2, 0.5], [0.5, -1.0]],
        [[-1.0, 0.1], [2.0, -0.2]],
        [[-0.1, 1.0], [0.05, -0.5]],
        [[0.3, 0.01], [0.02, -0.2]],
    ];
    let widths = [0.75, 1.5, 3.0, 6.0, 12.0];
    let cfg = EstimatorConfig::default();
    let mut worst = (0.0_f64, 0, 0.0);
    let mut converged = true;
    for (i, a0) in matrices.iter().enumerate() {
        let mat = ConstantMatrix::new(*a0).unwrap();
        for &l in &widths {
            let est = lyapunov_exponent(&mat, l, d, &cfg).expect("estimate");
            converged &= est.converged;
            let err = (est.lambda - principal_eigenvalue(*a0, l, d)).abs();
            if err > worst.0 {
                worst = (err, i, l);
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    gate.record(
        "lyapunov oracle grid",
        worst.0 <= 2e-3 && converged && secs <= 300.0,
        format!(
            "max |err| {:.3e} (matrix {}, L {}), bound 2e-3; all converged {converged}; runtime bound 300 s",
            worst.0, worst.1, worst.2
        ),
        started,
    );
}

fn monotonicity(gate: &mut Gate) {
    let started = Instant::now();
    let (spec, init, solver) = reference();
    let ls = RunConfig::default().run.l_list;
    let sweep = lambda_sweep(&spec.linearization(), spec.diffusivities(), &ls, &EstimatorConfig::default()).expect("sweep");
    let lambdas: Vec<String> = sweep.points.iter().map(|p| format!("{:.4}", p.estimate.lambda)).collect();
    gate.record(
        "lambda nondecreasing in L",
        ls.len() == 10 && sweep.is_monotone(),
        format!("{} points, lambda = [{}], violations {:?}", ls.len(), lambdas.join(", "), sweep.monotonicity_violations),
        started,
    );

    let started = Instant::now();
    let solver = solver.with_uniform_outputs(10.0);
    let report = mu_monotonicity(&spec.with_h0(1.0), &init, &[0.1, 0.2, 0.4], &solver, 1e-8).expect("mu runs");
    let worst = report
        .checks
        .iter()
        .filter(|c| c.name.contains("monotone"))
        .map(|c| c.measured)
        .fold(f64::NEG_INFINITY, f64::max);
    gate.record(
        "fronts monotone in mu",
        report.passed(),
        format!("mu 0.1, 0.2, 0.4 at {} shared times; worst ordering gap {worst:.3e}, bound 1e-8", solver.output_times.len()),
        started,
    );
}

fn bounds(gate: &mut Gate) {
    let started = Instant::now();
    let (spec, init, mut solver) = reference();
    let spec = spec.with_h0(2.0).with_mu(0.1);
    // Any negative or over-capacity value rejects the step instead of being clipped.
    solver.bound_mode = BoundMode::RejectStep;
    let solver = solver.with_uniform_outputs(5.0);
    let traj = simulate(&spec, &init, &solver).expect("spreading run");
    let tol = 1.0 + 1e-8;
    let max_u = traj.summaries.iter().map(|s| s.sup_u).fold(0.0, f64::max);
    let max_v = traj.summaries.iter().map(|s| s.sup_v).fold(0.0, f64::max);
    let min_field = traj
        .snapshots
        .iter()
        .flat_map(|s| s.m.iter().chain(s.n.iter()))
        .copied()
        .fold(f64::INFINITY, f64::min);
    let h_ok = traj.summaries.windows(2).all(|w| w[1].h >= w[0].h);
    let g_ok = traj.summaries.windows(2).all(|w| w[1].g <= w[0].g);
    let ok = max_u <= spec.bird_capacity * tol
        && max_v <= spec.mosquito_capacity * tol
        && min_field >= 0.0
        && h_ok
        && g_ok
        && traj.status == wnv_core::RunStatus::Completed;
    gate.record(
        "bounds and front signs",
        ok,
        format!(
            "{} accepted steps, {} rejected; sup U {max_u:.6} <= {}, sup V {max_v:.6} <= {}, min field {min_field:.3e} >= 0; h nondecreasing {h_ok}, g nonincreasing {g_ok}",
            traj.accepted_steps, traj.rejected_steps, spec.bird_capacity, spec.mosquito_capacity
        ),
        started,
    );
}

fn comparison(gate: &mut Gate) {
    let started = Instant::now();
    let (spec, init, mut solver) = reference();
    solver.t_end = 50.0;
    let solver = solver.with_uniform_outputs(1.0);
    let spec = spec.with_h0(1.0);
    let report = comparison_suite(&spec, &default_comparison_cases(&spec, &init), &solver, 1e-8).expect("comparison runs");
    let failures: Vec<String> = report.failures().map(|c| c.to_string()).collect();
    gate.record(
        "comparison principle on [0, 50]",
        report.passed(),
        format!("{} checks, tolerance 1e-8; failures {failures:?}", report.checks.len()),
        started,
    );
}

fn convergence(gate: &mut Gate) {
    let started = Instant::now();
    let spec = default_paper_spec();
    let space = manufactured_convergence(&spec, &spatial_levels(40, 3, 0.5), 1.0).expect("spatial study");
    let time = manufactured_convergence(&spec, &temporal_levels(800, 0.1, 3), 1.0).expect("temporal study");
    let (p, q) = (space.observed_order(), time.observed_order());
    let secs = started.elapsed().as_secs_f64();
    gate.record(
        "manufactured-solution orders",
        (1.9..=2.2).contains(&p) && (0.9..=1.1).contains(&q) && secs <= 600.0,
        format!("spatial {p:.4} in [1.9, 2.2], temporal {q:.4} in [0.9, 1.1], 3 levels each; runtime bound 600 s"),
        started,
    );
}

fn vanishing_width(gate: &mut Gate, summary: &ReproduceSummary, started: Instant) {
    let bar = 2.0 * summary.l_star + 0.1;
    let vanishing: Vec<(String, f64)> = summary
        .cases
        .iter()
        .filter(|c| c.classification.verdict == Verdict::Vanishing)
        .map(|c| (c.case.label.to_string(), c.trajectory.last().width()))
        .collect();
    let ok = !vanishing.is_empty() && vanishing.iter().all(|v| v.1 <= bar);
    let widths: Vec<String> = vanishing.iter().map(|(n, w)| format!("{n} {w:.4}")).collect();
    gate.record(
        "vanishing width bound",
        ok,
        format!("final widths [{}] <= 2 L* + 0.1 = {bar:.4}", widths.join(", ")),
        started,
    );
}

fn persistence(gate: &mut Gate) {
    let started = Instant::now();
    let (spec, init, solver) = reference();
    let probe = spreading_state_probe(&spec.with_h0(2.0).with_mu(0.1), &init, &solver).expect("probe run");
    let origin = probe.probes.iter().find(|p| p.x == 0.0).expect("probe at x = 0");
    gate.record(
        "spreading persistence floor",
        origin.floor_u > 0.0 && origin.floor_v > 0.0,
        format!(
            "inf U(0, t) = {:.4e}, inf V(0, t) = {:.4e} over t in [240, 300]; best translation {:?}, discrepancy {:.3e}",
            origin.floor_u, origin.floor_v, origin.best_period, origin.discrepancy
        ),
        started,
    );
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(gate: &mut Gate) {
    let started = Instant::now();
    let cfg = RunConfig::parse("[model]\nh0 = 2.0\n[solver]\nt_end = 60\noutput_times = 0, 20, 40, 60\nprobes = 0, 1\n").unwrap();
    let init = cfg.init.initial_data(None).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let traj = simulate(&cfg.model, &init, &cfg.solver).expect("run");
        write_trajectory_csv(&traj, d).expect("write");
    }
    let (a, b) = (csv_bytes(&dirs[0]), csv_bytes(&dirs[1]));
    gate.record(
        "bitwise determinism",
        !a.is_empty() && a == b,
        format!("{} CSV files compared byte for byte", a.len()),
        started,
    );
}

fn main() {
    let mut gate = Gate { failed: 0, total: 0 };
    let started = Instant::now();
    let (spec, init, solver) = reference();
    let summary = reproduce(
        &spec,
        &init,
        &ReproduceOptions {
            solver,
            ..ReproduceOptions::default()
        },
    )
    .expect("reproduce pipeline");
    regimes(&mut gate, summary.l_star);
    thresholds(&mut gate, &summary, started);
    lyapunov_oracle(&mut gate);
    monotonicity(&mut gate);
    bounds(&mut gate);
    comparison(&mut gate);
    convergence(&mut gate);
    vanishing_width(&mut gate, &summary, started);
    persistence(&mut gate);
    determinism(&mut gate);
    println!("acceptance: {} of {} criteria passed", gate.total - gate.failed, gate.total);
    if gate.failed > 0 {
        std::process::exit(1);
    }
}
