//! The reference experiment set: four runs at fixed `mu` with varying `h0`,
//! two at fixed `h0` with varying `mu`, and the threshold searches.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lyapunov::{lambda_of_t, EstimatorConfig, LambdaAtTime};
use crate::model::{InitialData, ModelSpec};
use crate::output::{write_lambda_series_csv, write_lstar_transcript, write_probe_transcript, write_table, write_trajectory_csv};
use crate::plot::write_plots;
use crate::report::{Check, Report};
use crate::solver::{simulate, SolverConfig, Trajectory};
use crate::thresholds::{
    classify, dichotomy_check, find_h0_star, find_l_star, find_mu_star, transcript_is_monotone, Classification,
    ClassifyConfig, LStar, ThresholdSearch, Verdict, DEFAULT_SHIFTS,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceCase {
    pub label: &'static str,
    pub h0: f64,
    pub mu: f64,
    pub expected: Verdict,
}

pub const REFERENCE_CASES: [ReferenceCase; 6] = [
    ReferenceCase { label: "fig1a", h0: 2.0, mu: 0.1, expected: Verdict::Spreading },
    ReferenceCase { label: "fig1b", h0: 1.0, mu: 0.1, expected: Verdict::Spreading },
    ReferenceCase { label: "fig1c", h0: 0.6, mu: 0.1, expected: Verdict::Vanishing },
    ReferenceCase { label: "fig1d", h0: 0.5, mu: 0.1, expected: Verdict::Vanishing },
    ReferenceCase { label: "fig2a", h0: 0.6, mu: 0.2, expected: Verdict::Spreading },
    ReferenceCase { label: "fig2b", h0: 0.6, mu: 0.1, expected: Verdict::Vanishing },
];

/// Published brackets the searches are compared against.
pub const REFERENCE_HALF_WIDTH_INTERVAL: (f64, f64) = (0.6, 1.0);
pub const REFERENCE_MU_INTERVAL: (f64, f64) = (0.1, 0.2);
/// `h0` of the fixed-width `mu` experiments.
pub const REFERENCE_MU_H0: f64 = 0.6;

#[derive(Clone, Debug, PartialEq)]
pub struct ReproduceOptions {
    pub solver: SolverConfig,
    pub classify: ClassifyConfig,
    pub estimator: EstimatorConfig,
    pub shifts: Vec<f64>,
    pub l_bracket: (f64, f64),
    /// Skips the `L*` search when set.
    pub l_star: Option<f64>,
    pub h0_bracket: (f64, f64),
    /// Wider `mu` bracket searched after the published one.
    pub mu_bracket: (f64, f64),
    pub lambda_times: Vec<f64>,
    pub vanishing_tolerance: f64,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            classify: ClassifyConfig::default(),
            estimator: EstimatorConfig::default(),
            shifts: DEFAULT_SHIFTS.to_vec(),
            l_bracket: (0.5, 2.0),
            l_star: None,
            h0_bracket: REFERENCE_HALF_WIDTH_INTERVAL,
            mu_bracket: (0.1, 2.0),
            lambda_times: vec![0.0, 100.0, 200.0, 300.0],
            vanishing_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub case: ReferenceCase,
    pub trajectory: Trajectory,
    pub classification: Classification,
    pub lambda_series: Vec<LambdaAtTime>,
    pub dichotomy: Report,
}

impl CaseResult {
    pub fn matches(&self) -> bool {
        self.classification.verdict == self.case.expected
    }
}

/// A search outcome kept even when it failed, so the summary can show why.
pub type SearchOutcome = std::result::Result<ThresholdSearch, String>;

#[derive(Clone, Debug)]
pub struct ReproduceSummary {
    pub cases: Vec<CaseResult>,
    /// `L*` from the worst-case exponent, or the configured value.
    pub l_star: f64,
    pub l_star_search: Option<LStar>,
    /// Critical `h0` at the fixed `mu` of the first four cases.
    pub h0_star: SearchOutcome,
    /// Search restricted to the published `mu` bracket.
    pub mu_star_reference: SearchOutcome,
    /// Search over the wider configured bracket.
    pub mu_star: SearchOutcome,
    pub checks: Report,
}

fn run_case(spec: &ModelSpec, init: &InitialData, case: ReferenceCase, opts: &ReproduceOptions) -> Result<Trajectory> {
    let mut cfg = opts.solver.clone();
    cfg.raster_rows = cfg.raster_rows.max(300);
    simulate(&spec.with_h0(case.h0).with_mu(case.mu), init, &cfg)
}

/// Runs every reference case, the `L*`, `h0*` and `mu*` searches, and the
/// cross-checks between them.
pub fn reproduce(spec: &ModelSpec, init: &InitialData, opts: &ReproduceOptions) -> Result<ReproduceSummary> {
    let mat = spec.linearization();
    let diffusion = spec.diffusivities();
    let l_star_search = match opts.l_star {
        Some(_) => None,
        None => Some(find_l_star(&mat, diffusion, opts.l_bracket, &opts.shifts, &opts.estimator)?),
    };
    let l_star = opts.l_star.unwrap_or_else(|| l_star_search.as_ref().unwrap().l_star);

    let runs = REFERENCE_CASES
        .par_iter()
        .map(|&case| run_case(spec, init, case, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut cases = Vec::new();
    for (case, trajectory) in REFERENCE_CASES.into_iter().zip(runs) {
        let classification = classify(&trajectory, l_star, &opts.classify);
        let case_spec = spec.with_h0(case.h0).with_mu(case.mu);
        let lambda_series = if classification.verdict == Verdict::Spreading {
            let times: Vec<f64> = opts
                .lambda_times
                .iter()
                .copied()
                .filter(|&t| t <= trajectory.last().t)
                .collect();
            lambda_of_t(&case_spec, &trajectory, &times, &opts.estimator)?
        } else {
            Vec::new()
        };
        let dichotomy = dichotomy_check(&trajectory, &classification, l_star, &lambda_series, opts.vanishing_tolerance);
        cases.push(CaseResult {
            case,
            trajectory,
            classification,
            lambda_series,
            dichotomy,
        });
    }

    let keep = |r: Result<ThresholdSearch>| r.map_err(|e| e.to_string());
    let fixed_mu = spec.with_mu(REFERENCE_CASES[0].mu);
    let h0_star = keep(find_h0_star(&fixed_mu, init, opts.h0_bracket, &opts.solver, &opts.classify, l_star));
    let fixed_h0 = spec.with_h0(REFERENCE_MU_H0);
    let mu_star_reference = keep(find_mu_star(
        &fixed_h0,
        init,
        REFERENCE_MU_INTERVAL,
        &opts.solver,
        &opts.classify,
        l_star,
    ));
    let mu_star = keep(find_mu_star(&fixed_h0, init, opts.mu_bracket, &opts.solver, &opts.classify, l_star));

    let mut checks = Report::default();
    for c in &cases {
        checks.push(Check {
            name: format!(
                "{} (h0 = {}, mu = {}): {} expected, got {}",
                c.case.label, c.case.h0, c.case.mu, c.case.expected, c.classification.verdict
            ),
            passed: c.matches(),
            measured: c.classification.evidence.final_width,
            bound: c.classification.evidence.spreading_width_bar,
        });
        for d in &c.dichotomy.checks {
            checks.push(Check {
                name: format!("{}: {}", c.case.label, d.name),
                ..d.clone()
            });
        }
    }
    let (lo, hi) = REFERENCE_HALF_WIDTH_INTERVAL;
    checks.push(in_interval("critical h0 at mu = 0.1 (simulated)", &h0_star, lo, hi));
    let (lo, hi) = REFERENCE_MU_INTERVAL;
    checks.push(in_interval("critical mu at h0 = 0.6, published bracket", &mu_star_reference, lo, hi));
    checks.push(in_interval("critical mu at h0 = 0.6, wide bracket", &mu_star, lo, hi));
    Ok(ReproduceSummary {
        cases,
        l_star,
        l_star_search,
        h0_star,
        mu_star_reference,
        mu_star,
        checks,
    })
}

fn in_interval(name: &str, outcome: &SearchOutcome, lo: f64, hi: f64) -> Check {
    match outcome {
        Ok(s) => Check {
            name: format!("{name} in ({lo}, {hi}), monotone transcript"),
            passed: s.threshold > lo && s.threshold < hi && transcript_is_monotone(&s.transcript),
            measured: s.threshold,
            bound: hi,
        },
        Err(e) => Check {
            name: format!("{name} in ({lo}, {hi}): search failed: {e}"),
            passed: false,
            measured: f64::NAN,
            bound: hi,
        },
    }
}

fn describe(outcome: &SearchOutcome) -> String {
    match outcome {
        Ok(s) => format!(
            "{:.4} in ({:.4}, {:.4}) after {} bisection steps, {} probes",
            s.threshold,
            s.bracket.0,
            s.bracket.1,
            s.iterations,
            s.transcript.len()
        ),
        Err(e) => format!("not found: {e}"),
    }
}

impl ReproduceSummary {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "case   h0    mu    expected     verdict      final width  final supU   final supV");
        for c in &self.cases {
            let e = &c.classification.evidence;
            let _ = writeln!(
                s,
                "{:<6} {:<5} {:<5} {:<12} {:<12} {:<12.5} {:<12.4e} {:.4e}",
                c.case.label,
                c.case.h0,
                c.case.mu,
                c.case.expected.name(),
                c.classification.verdict.name(),
                e.final_width,
                e.final_sup_u,
                e.final_sup_v
            );
        }
        let _ = writeln!(s);
        match &self.l_star_search {
            Some(l) => {
                let _ = writeln!(
                    s,
                    "L* (worst-case exponent over shifts) = {:.4}, bracket ({:.4}, {:.4}), {} steps",
                    l.l_star, l.bracket.0, l.bracket.1, l.iterations
                );
            }
            None => {
                let _ = writeln!(s, "L* (configured) = {:.4}", self.l_star);
            }
        }
        let _ = writeln!(s, "critical h0 at mu = 0.1: {}", describe(&self.h0_star));
        let _ = writeln!(
            s,
            "critical mu at h0 = 0.6, bracket ({}, {}): {}",
            REFERENCE_MU_INTERVAL.0,
            REFERENCE_MU_INTERVAL.1,
            describe(&self.mu_star_reference)
        );
        let _ = writeln!(s, "critical mu at h0 = 0.6, wide bracket: {}", describe(&self.mu_star));
        let _ = writeln!(s);
        let _ = write!(s, "{}", self.checks);
        s
    }

    /// Writes `summary.txt`, `cases.csv`, the search transcripts and one
    /// directory of CSV and SVG output per case.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let path = dir.join("summary.txt");
        std::fs::write(&path, self.table()).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        let path = dir.join("cases.csv");
        write_table(
            &path,
            &["case", "h0", "mu", "expected", "verdict", "final_width", "final_supU", "final_supV"],
            self.cases.iter().map(|c| {
                let e = &c.classification.evidence;
                vec![
                    c.case.label.to_string(),
                    format!("{:?}", c.case.h0),
                    format!("{:?}", c.case.mu),
                    c.case.expected.name().to_string(),
                    c.classification.verdict.name().to_string(),
                    format!("{:?}", e.final_width),
                    format!("{:?}", e.final_sup_u),
                    format!("{:?}", e.final_sup_v),
                ]
            }),
        )?;
        written.push(path);
        if let Some(l) = &self.l_star_search {
            let path = dir.join("lstar_transcript.csv");
            write_lstar_transcript(&l.transcript, &path)?;
            written.push(path);
        }
        for (name, outcome, param) in [
            ("h0_transcript.csv", &self.h0_star, "h0"),
            ("mu_transcript_reference.csv", &self.mu_star_reference, "mu"),
            ("mu_transcript.csv", &self.mu_star, "mu"),
        ] {
            if let Ok(s) = outcome {
                let path = dir.join(name);
                write_probe_transcript(&s.transcript, param, &path)?;
                written.push(path);
            }
        }
        for c in &self.cases {
            let sub = dir.join(c.case.label);
            written.extend(write_trajectory_csv(&c.trajectory, &sub)?);
            written.extend(write_plots(&c.trajectory, &sub)?);
            if !c.lambda_series.is_empty() {
                let path = sub.join("lambda_t.csv");
                write_lambda_series_csv(&c.lambda_series, &path)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}
