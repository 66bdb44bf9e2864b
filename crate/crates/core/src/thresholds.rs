//! Critical half-width `L*`, critical expansion rate `mu*`, and the
//! spreading/vanishing classification of finite-horizon trajectories.

use std::fmt;

use crate::coefficients::LinearizationMatrix;
use crate::error::{Error, Result};
use crate::lyapunov::{lyapunov_exponent, EstimatorConfig, LambdaAtTime, LyapunovEstimate};
use crate::model::{InitialData, ModelSpec};
use crate::report::{Check, Report};
use crate::solver::{simulate, RunStatus, SolverConfig, Trajectory};

/// Default shift sample for the worst-case exponent.
pub const DEFAULT_SHIFTS: [f64; 7] = [-20.0, -10.0, -5.0, 0.0, 5.0, 10.0, 20.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Vanishing,
    Undetermined,
    Spreading,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Spreading => "Spreading",
            Verdict::Vanishing => "Vanishing",
            Verdict::Undetermined => "Undetermined",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyConfig {
    /// Density below which the infection counts as extinct.
    pub extinction_eps: f64,
    /// Width growth rate below which the fronts count as stopped.
    pub width_slope_eps: f64,
    /// Trailing fraction of the horizon used as the evidence window.
    pub window_fraction: f64,
    /// Spreading is declared once the width exceeds `2 L* + width_margin`.
    pub width_margin: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            extinction_eps: 1e-6,
            width_slope_eps: 1e-4,
            window_fraction: 0.2,
            width_margin: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evidence {
    pub final_width: f64,
    pub max_width: f64,
    pub final_sup_u: f64,
    pub final_sup_v: f64,
    /// Least-squares slope of the width over the window.
    pub width_slope: f64,
    /// Least-squares slope of `ln max(supU, supV)` over the window.
    pub norm_slope: f64,
    /// Smallest `max(supU, supV)` in the window.
    pub norm_floor: f64,
    /// Largest `max(supU, supV)` in the window.
    pub norm_peak: f64,
    pub spreading_width_bar: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Evidence,
}

pub fn classify(traj: &Trajectory, l_star: f64, cfg: &ClassifyConfig) -> Classification {
    let s = &traj.summaries;
    let last = traj.last();
    let t0 = last.t * (1.0 - cfg.window_fraction);
    let window: Vec<_> = s.iter().filter(|r| r.t >= t0).collect();
    let norm = |r: &crate::solver::Summary| r.sup_u.max(r.sup_v);
    let width_pts: Vec<(f64, f64)> = window.iter().map(|r| (r.t, r.width())).collect();
    let log_pts: Vec<(f64, f64)> = window
        .iter()
        .filter(|r| norm(r) > 0.0)
        .map(|r| (r.t, norm(r).ln()))
        .collect();
    let bar = 2.0 * l_star + cfg.width_margin;
    let evidence = Evidence {
        final_width: last.width(),
        max_width: s.iter().map(|r| r.width()).fold(0.0, f64::max),
        final_sup_u: last.sup_u,
        final_sup_v: last.sup_v,
        width_slope: slope(&width_pts),
        norm_slope: slope(&log_pts),
        norm_floor: window.iter().map(|r| norm(r)).fold(f64::INFINITY, f64::min),
        norm_peak: window.iter().map(|r| norm(r)).fold(0.0, f64::max),
        spreading_width_bar: bar,
    };
    let verdict = if traj.status != RunStatus::Completed {
        Verdict::Undetermined
    } else if evidence.max_width > bar {
        Verdict::Spreading
    } else if evidence.norm_peak < cfg.extinction_eps && evidence.width_slope < cfg.width_slope_eps {
        Verdict::Vanishing
    } else {
        Verdict::Undetermined
    };
    Classification { verdict, evidence }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt) * (t - mt))
    });
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Worst-case exponent over a set of spatial shifts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftedLambda {
    pub half_width: f64,
    pub worst_shift: f64,
    pub estimate: LyapunovEstimate,
}

/// `min over shifts of lambda(A(. + shift, .), L)`. With `stop_at_negative`
/// the scan ends at the first negative exponent (the sign is then decided).
pub fn worst_case_lambda(
    mat: &LinearizationMatrix,
    diffusion: (f64, f64),
    half_width: f64,
    shifts: &[f64],
    cfg: &EstimatorConfig,
    stop_at_negative: bool,
) -> Result<ShiftedLambda> {
    if shifts.is_empty() {
        return Err(Error::Validation("shift sample is empty".into()));
    }
    let mut worst: Option<ShiftedLambda> = None;
    for &shift in shifts {
        let estimate = lyapunov_exponent(&mat.shifted_x(shift), half_width, diffusion, cfg)?;
        if worst.is_none_or(|w| estimate.lambda < w.estimate.lambda) {
            worst = Some(ShiftedLambda {
                half_width,
                worst_shift: shift,
                estimate,
            });
        }
        if stop_at_negative && estimate.lambda < 0.0 {
            break;
        }
    }
    Ok(worst.expect("non-empty shifts"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LStar {
    pub l_star: f64,
    pub iterations: usize,
    /// Final bracket `(lambda < 0, lambda > 0)`.
    pub bracket: (f64, f64),
    pub transcript: Vec<ShiftedLambda>,
}

/// Bisection on `L` for the zero of the worst-case exponent.
pub fn find_l_star(
    mat: &LinearizationMatrix,
    diffusion: (f64, f64),
    bracket: (f64, f64),
    shifts: &[f64],
    cfg: &EstimatorConfig,
) -> Result<LStar> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Validation(format!("invalid L bracket ({lo}, {hi})")));
    }
    let mut transcript = Vec::new();
    let at_lo = worst_case_lambda(mat, diffusion, lo, shifts, cfg, true)?;
    let at_hi = worst_case_lambda(mat, diffusion, hi, shifts, cfg, false)?;
    transcript.push(at_lo);
    transcript.push(at_hi);
    if !(at_lo.estimate.lambda < 0.0 && at_hi.estimate.lambda > 0.0) {
        return Err(Error::BadBracket {
            lo,
            hi,
            detail: format!(
                "worst-case lambda is {} at L = {lo} and {} at L = {hi}",
                at_lo.estimate.lambda, at_hi.estimate.lambda
            ),
        });
    }
    let mut iterations = 0;
    while hi - lo >= 1e-2 {
        iterations += 1;
        if iterations > 60 {
            return Err(Error::NotConverged("L* bisection exceeded 60 iterations".into()));
        }
        let mid = 0.5 * (lo + hi);
        let probe = worst_case_lambda(mat, diffusion, mid, shifts, cfg, true)?;
        transcript.push(probe);
        let est = probe.estimate;
        if est.lambda.abs() < est.ci_width() {
            if !est.converged {
                return Err(Error::NotConverged(format!(
                    "exponent at L = {mid} is within its CI of zero but not converged"
                )));
            }
            return Ok(LStar {
                l_star: mid,
                iterations,
                bracket: (lo, hi),
                transcript,
            });
        }
        if est.lambda < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LStar {
        l_star: 0.5 * (lo + hi),
        iterations,
        bracket: (lo, hi),
        transcript,
    })
}

/// One simulation-and-classify probe of a threshold search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub value: f64,
    pub verdict: Verdict,
    pub t_end: f64,
    pub final_width: f64,
    pub final_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSearch {
    pub threshold: f64,
    /// Final bracket `(vanishing, spreading)`.
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub transcript: Vec<Probe>,
}

/// Whether verdicts sorted by parameter value never go from Spreading back to Vanishing.
pub fn transcript_is_monotone(transcript: &[Probe]) -> bool {
    let mut sorted: Vec<&Probe> = transcript.iter().collect();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
    sorted
        .windows(2)
        .all(|w| !(w[0].verdict == Verdict::Spreading && w[1].verdict == Verdict::Vanishing))
}

fn run_probe(
    value: f64,
    spec: &ModelSpec,
    init: &InitialData,
    solver: &SolverConfig,
    classify_cfg: &ClassifyConfig,
    l_star: f64,
) -> Result<Probe> {
    let mut cfg = solver.clone();
    cfg.output_times.clear();
    cfg.probes.clear();
    cfg.raster_rows = 0;
    for attempt in 0..2 {
        let traj = simulate(spec, init, &cfg)?;
        let c = classify(&traj, l_star, classify_cfg);
        if c.verdict != Verdict::Undetermined || attempt == 1 {
            return Ok(Probe {
                value,
                verdict: c.verdict,
                t_end: cfg.t_end,
                final_width: c.evidence.final_width,
                final_norm: c.evidence.final_sup_u.max(c.evidence.final_sup_v),
            });
        }
        cfg.t_end *= 2.0;
    }
    unreachable!()
}

/// Bisection on a scalar model parameter with simulate + classify as the predicate.
///
/// `make` maps the parameter to the model. The search stops once the bracket
/// is narrower than `rel_tol * hi`.
pub fn bisect_on_parameter<F>(
    name: &str,
    bracket: (f64, f64),
    make: F,
    init: &InitialData,
    solver: &SolverConfig,
    classify_cfg: &ClassifyConfig,
    l_star: f64,
    rel_tol: f64,
) -> Result<ThresholdSearch>
where
    F: Fn(f64) -> ModelSpec + Sync,
{
    let (mut lo, mut hi) = bracket;
    if !(hi > lo) {
        return Err(Error::Validation(format!("invalid {name} bracket ({lo}, {hi})")));
    }
    let probe = |v: f64| run_probe(v, &make(v), init, solver, classify_cfg, l_star);
    let (p_lo, p_hi) = rayon::join(|| probe(lo), || probe(hi));
    let (p_lo, p_hi) = (p_lo?, p_hi?);
    let mut transcript = vec![p_lo, p_hi];
    if p_lo.verdict != Verdict::Vanishing || p_hi.verdict != Verdict::Spreading {
        return Err(Error::BadBracket {
            lo,
            hi,
            detail: format!(
                "{name} = {lo} gives {}, {name} = {hi} gives {}",
                p_lo.verdict, p_hi.verdict
            ),
        });
    }
    let mut iterations = 0;
    while hi - lo >= rel_tol * hi {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let p = probe(mid)?;
        transcript.push(p);
        match p.verdict {
            Verdict::Vanishing => lo = mid,
            Verdict::Spreading => hi = mid,
            Verdict::Undetermined => {
                return Err(Error::NotConverged(format!(
                    "{name} = {mid} stayed undetermined up to t = {}",
                    p.t_end
                )))
            }
        }
    }
    if !transcript_is_monotone(&transcript) {
        return Err(Error::Validation(format!(
            "{name} bisection verdicts are not monotone in the parameter"
        )));
    }
    Ok(ThresholdSearch {
        threshold: 0.5 * (lo + hi),
        bracket: (lo, hi),
        iterations,
        transcript,
    })
}

/// Critical expansion rate for fixed initial data and `h0`.
pub fn find_mu_star(
    spec: &ModelSpec,
    init: &InitialData,
    bracket: (f64, f64),
    solver: &SolverConfig,
    classify_cfg: &ClassifyConfig,
    l_star: f64,
) -> Result<ThresholdSearch> {
    bisect_on_parameter(
        "mu",
        bracket,
        |mu| spec.with_mu(mu),
        init,
        solver,
        classify_cfg,
        l_star,
        1e-2,
    )
}

/// Critical initial half-width for fixed `mu`, found by simulation.
pub fn find_h0_star(
    spec: &ModelSpec,
    init: &InitialData,
    bracket: (f64, f64),
    solver: &SolverConfig,
    classify_cfg: &ClassifyConfig,
    l_star: f64,
) -> Result<ThresholdSearch> {
    bisect_on_parameter(
        "h0",
        bracket,
        |h0| spec.with_h0(h0),
        init,
        solver,
        classify_cfg,
        l_star,
        1e-2,
    )
}

/// Cross-checks a classified trajectory against `L*` and its `lambda(t)` series.
pub fn dichotomy_check(
    traj: &Trajectory,
    classification: &Classification,
    l_star: f64,
    lambda_series: &[LambdaAtTime],
    tol: f64,
) -> Report {
    let mut report = Report::default();
    match classification.verdict {
        Verdict::Undetermined => {}
        Verdict::Vanishing => {
            report.push(Check::at_most(
                "vanishing final width <= 2 L* + tol",
                traj.last().width(),
                2.0 * l_star + tol,
            ));
        }
        Verdict::Spreading => {
            if let Some(first) = lambda_series.first() {
                if first.estimate.lambda > 0.0 {
                    report.push(Check::at_least(
                        "lambda(0) > 0 implies initial width >= 2 L* - tol",
                        traj.first().width(),
                        2.0 * l_star - tol,
                    ));
                }
            }
            if lambda_series.len() >= 2 {
                let worst_drop = lambda_series
                    .windows(2)
                    .map(|w| {
                        w[0].estimate.lambda
                            - w[1].estimate.lambda
                            - (w[0].estimate.ci_width() + w[1].estimate.ci_width())
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                report.push(Check::at_most("lambda(t) nondecreasing within CI", worst_drop, 0.0));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientField;
    use crate::lyapunov::lyapunov_constant_oracle;
    use crate::solver::Summary;

    fn constant_matrix(d1: f64, a1n1: f64, a2n2: f64, d2: f64) -> LinearizationMatrix {
        let c = |v: f64| CoefficientField::constant(v).unwrap();
        LinearizationMatrix::new(c(a1n1), c(a2n2), c(d1), c(d2), 1.0, 1.0).unwrap()
    }

    fn quick() -> EstimatorConfig {
        EstimatorConfig {
            cells: 64,
            horizon: 200.0,
            ..EstimatorConfig::default()
        }
    }

    fn traj_from(rows: Vec<(f64, f64, f64)>) -> Trajectory {
        Trajectory {
            summaries: rows
                .into_iter()
                .map(|(t, w, norm)| Summary {
                    t,
                    g: -0.5 * w,
                    h: 0.5 * w,
                    gdot: 0.0,
                    hdot: 0.0,
                    sup_u: norm,
                    sup_v: norm,
                    mass_u: 0.0,
                    mass_v: 0.0,
                })
                .collect(),
            snapshots: Vec::new(),
            status: RunStatus::Completed,
            probes: Vec::new(),
            probe_series: Vec::new(),
            raster: Vec::new(),
            accepted_steps: 0,
            rejected_steps: 0,
            t_end: 100.0,
        }
    }

    #[test]
    fn l_star_matches_oracle_root() {
        let (d1, a1n1, a2n2, d2) = (0.4, 0.9, 0.8, 0.2);
        let diffusion = (1.0, 0.5);
        let mat = constant_matrix(d1, a1n1, a2n2, d2);
        let a0 = [[-d1, a1n1], [a2n2, -d2]];
        // Root of the oracle in L by a fine bisection on the closed form.
        let (mut lo, mut hi) = (0.1, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lyapunov_constant_oracle(a0, mid, diffusion) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let exact = 0.5 * (lo + hi);
        let found = find_l_star(&mat, diffusion, (0.5, 5.0), &[0.0], &quick()).unwrap();
        assert!((found.l_star - exact).abs() < 1e-2, "{} vs {exact}", found.l_star);
    }

    #[test]
    fn negative_definite_has_no_l_star() {
        let mat = constant_matrix(1.0, 1e-9, 1e-9, 1.0);
        let err = find_l_star(&mat, (1.0, 1.0), (0.5, 5.0), &[0.0], &quick()).unwrap_err();
        assert!(matches!(err, Error::BadBracket { .. }));
    }

    #[test]
    fn zero_data_vanishes() {
        let traj = traj_from((0..=100).map(|k| (k as f64, 1.2, 0.0)).collect());
        let c = classify(&traj, 1.0, &ClassifyConfig::default());
        assert_eq!(c.verdict, Verdict::Vanishing);
    }

    #[test]
    fn wide_domain_spreads() {
        let traj = traj_from((0..=100).map(|k| (k as f64, 1.0 + 0.1 * k as f64, 0.5)).collect());
        let c = classify(&traj, 1.0, &ClassifyConfig::default());
        assert_eq!(c.verdict, Verdict::Spreading);
        assert!(c.evidence.width_slope > 0.09);
    }

    #[test]
    fn slow_decay_is_undetermined() {
        let traj = traj_from((0..=100).map(|k| (k as f64, 1.5, 1e-3)).collect());
        let c = classify(&traj, 1.0, &ClassifyConfig::default());
        assert_eq!(c.verdict, Verdict::Undetermined);
        let mut blown = traj_from(vec![(0.0, 10.0, 1.0), (1.0, 10.0, 1.0)]);
        blown.status = RunStatus::Blowup;
        assert_eq!(classify(&blown, 1.0, &ClassifyConfig::default()).verdict, Verdict::Undetermined);
    }

    #[test]
    fn classification_is_deterministic() {
        let traj = traj_from((0..=50).map(|k| (k as f64, 2.0, (-(k as f64)).exp())).collect());
        let a = classify(&traj, 1.2, &ClassifyConfig::default());
        let b = classify(&traj, 1.2, &ClassifyConfig::default());
        assert_eq!(a, b);
    }

    #[test]
    fn undetermined_gives_empty_report() {
        let traj = traj_from((0..=10).map(|k| (k as f64, 1.5, 1e-3)).collect());
        let c = classify(&traj, 1.0, &ClassifyConfig::default());
        assert!(dichotomy_check(&traj, &c, 1.0, &[], 0.1).checks.is_empty());
    }

    #[test]
    fn monotone_transcript_check() {
        let p = |value, verdict| Probe {
            value,
            verdict,
            t_end: 1.0,
            final_width: 1.0,
            final_norm: 0.0,
        };
        assert!(transcript_is_monotone(&[
            p(0.1, Verdict::Vanishing),
            p(0.3, Verdict::Spreading),
            p(0.2, Verdict::Vanishing)
        ]));
        assert!(!transcript_is_monotone(&[
            p(0.1, Verdict::Spreading),
            p(0.3, Verdict::Vanishing)
        ]));
    }
}
