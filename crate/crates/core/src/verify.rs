//! Verification harnesses: manufactured solutions, comparison and
//! monotonicity drivers, and the almost-periodicity probe for spreading runs.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{InitialData, ModelSpec};
use crate::report::{Check, Report};
use crate::solver::{simulate, FrontState, GeometryRule, Forcing, SolverConfig, StepOptions, Stepper, Trajectory};
use crate::transform::FrontGeometry;

/// Front speed of the manufactured geometry `g = -1 - 0.1 t`, `h = 1 + 0.1 t`.
const MMS_SPEED: f64 = 0.1;

fn mms_geometry(t: f64) -> FrontGeometry {
    FrontGeometry {
        g: -1.0 - MMS_SPEED * t,
        h: 1.0 + MMS_SPEED * t,
        gdot: -MMS_SPEED,
        hdot: MMS_SPEED,
    }
}

/// `m* = n* = exp(-t) cos(pi y / 2)`.
fn mms_exact(y: f64, t: f64) -> f64 {
    (-t).exp() * (0.5 * PI * y).cos()
}

struct ManufacturedSource<'a> {
    spec: &'a ModelSpec,
}

impl Forcing for ManufacturedSource<'_> {
    fn source(&self, y: f64, t: f64, _frozen: &FrontGeometry) -> (f64, f64) {
        let geom = mms_geometry(t);
        let metric = geom.metric_terms(y).expect("y in [-1, 1]");
        let k = 0.5 * PI;
        let e = (-t).exp();
        let w = e * (k * y).cos();
        let w_t = -w;
        let w_y = -k * e * (k * y).sin();
        let w_yy = -k * k * w;
        let x = geom.y_to_x_unchecked(y);
        let (f1, f2) = self.spec.reaction(x, t, w, w);
        let transport = |d: f64| w_t - d * metric.diffusion_scale * w_yy + metric.drift * w_y;
        (
            transport(self.spec.bird_diffusivity) - f1,
            transport(self.spec.mosquito_diffusivity) - f2,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub dt: f64,
    /// Max nodal error of both species at the final time.
    pub error: f64,
    /// `log2` of the error ratio to the previous (coarser) level.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceStudy {
    /// Order observed between the two finest levels.
    pub fn observed_order(&self) -> f64 {
        self.rows.last().and_then(|r| r.order).unwrap_or(f64::NAN)
    }

    fn from_errors(levels: &[(usize, f64)], errors: Vec<f64>) -> Self {
        let rows = levels
            .iter()
            .zip(&errors)
            .enumerate()
            .map(|(i, (&(cells, dt), &error))| ConvergenceRow {
                cells,
                dt,
                error,
                order: (i > 0).then(|| {
                    let ratio_h = dt_or_dy_ratio(levels[i - 1], levels[i]);
                    (errors[i - 1] / error).ln() / ratio_h.ln()
                }),
            })
            .collect();
        Self { rows }
    }
}

/// Refinement factor between two levels: `dy` ratio for grid refinement,
/// `dt` ratio when only the step changes.
fn dt_or_dy_ratio(coarse: (usize, f64), fine: (usize, f64)) -> f64 {
    if coarse.0 != fine.0 {
        fine.0 as f64 / coarse.0 as f64
    } else {
        coarse.1 / fine.1
    }
}

/// Levels `J = j0 2^k` with `dt = c dy^2`.
pub fn spatial_levels(j0: usize, count: usize, c: f64) -> Vec<(usize, f64)> {
    (0..count)
        .map(|k| {
            let cells = j0 << k;
            let dy = 2.0 / cells as f64;
            (cells, c * dy * dy)
        })
        .collect()
}

/// Fixed grid `J`, steps `dt0 / 2^k`.
pub fn temporal_levels(cells: usize, dt0: f64, count: usize) -> Vec<(usize, f64)> {
    (0..count).map(|k| (cells, dt0 / (1u64 << k) as f64)).collect()
}

/// Fixed-step integration to `t_end`; the last step is shortened to land exactly.
fn march(spec: &ModelSpec, mut state: FrontState, dt: f64, t_end: f64, opts: &StepOptions<'_>) -> Result<FrontState> {
    let cfg = SolverConfig::default();
    let mut stepper = Stepper::new(state.cells());
    let steps = (t_end / dt).round().max(1.0) as usize;
    for k in 0..steps {
        let h = if k + 1 == steps { t_end - state.t } else { dt };
        state = stepper.advance(spec, &state, h, &cfg, opts)?;
    }
    Ok(state)
}

/// Solver error against `m* = n* = exp(-t) cos(pi y / 2)` on the prescribed
/// fronts `g = -1 - 0.1 t`, `h = 1 + 0.1 t`, with the induced sources added.
///
/// `levels` are `(J, dt)` pairs, coarsest first.
pub fn manufactured_convergence(spec: &ModelSpec, levels: &[(usize, f64)], t_end: f64) -> Result<ConvergenceStudy> {
    if levels.len() < 3 {
        return Err(Error::Validation("convergence study needs at least 3 levels".into()));
    }
    if levels.iter().any(|&(cells, dt)| cells < 4 || !(dt > 0.0)) {
        return Err(Error::Validation("levels need J >= 4 and dt > 0".into()));
    }
    spec.validate()?;
    let errors = levels
        .par_iter()
        .map(|&(cells, dt)| {
            let source = ManufacturedSource { spec };
            let geometry = |t: f64| mms_geometry(t);
            let opts = StepOptions {
                geometry: GeometryRule::Prescribed(&geometry),
                forcing: Some(&source),
                check_bounds: false,
            };
            let y: Vec<f64> = (0..=cells).map(|j| -1.0 + 2.0 * j as f64 / cells as f64).collect();
            let m0: Vec<f64> = y.iter().map(|&y| mms_exact(y, 0.0)).collect();
            let mut start = FrontState {
                t: 0.0,
                n: m0.clone(),
                m: m0,
                geom: mms_geometry(0.0),
            };
            start.m[0] = 0.0;
            start.m[cells] = 0.0;
            start.n[0] = 0.0;
            start.n[cells] = 0.0;
            let end = march(spec, start, dt, t_end, &opts)?;
            Ok(y.iter()
                .enumerate()
                .map(|(j, &yj)| {
                    let exact = mms_exact(yj, end.t);
                    (end.m[j] - exact).abs().max((end.n[j] - exact).abs())
                })
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConvergenceStudy::from_errors(levels, errors))
}

/// Self-convergence of `h(t_end)` with the Stefan rule live, on grids
/// `J, 2J, 4J` with `dt = c dy^2`. Reported without a pass bar.
#[derive(Clone, Debug, PartialEq)]
pub struct StefanSelfConvergence {
    pub cells: Vec<usize>,
    pub h_end: Vec<f64>,
    /// `log2(|h1 - h2| / |h2 - h3|)`.
    pub order: f64,
}

pub fn stefan_self_convergence(
    spec: &ModelSpec,
    init: &InitialData,
    j0: usize,
    c: f64,
    t_end: f64,
) -> Result<StefanSelfConvergence> {
    let levels = spatial_levels(j0, 3, c);
    let h_end = levels
        .par_iter()
        .map(|&(cells, dt)| {
            let opts = StepOptions {
                geometry: GeometryRule::Stefan { mu: spec.mu },
                forcing: None,
                check_bounds: true,
            };
            let start = FrontState::initial(spec, init, cells)?;
            Ok(march(spec, start, dt, t_end, &opts)?.geom.h)
        })
        .collect::<Result<Vec<f64>>>()?;
    let order = ((h_end[0] - h_end[1]).abs() / (h_end[1] - h_end[2]).abs()).log2();
    Ok(StefanSelfConvergence {
        cells: levels.iter().map(|l| l.0).collect(),
        h_end,
        order,
    })
}

/// A pair of initial data with `lower <= upper` pointwise.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonCase {
    pub name: String,
    pub lower: InitialData,
    pub upper: InitialData,
}

/// The identical pair and the `1.5x` capped pair built from `init`.
pub fn default_comparison_cases(spec: &ModelSpec, init: &InitialData) -> Vec<ComparisonCase> {
    vec![
        ComparisonCase {
            name: "identical".into(),
            lower: init.clone(),
            upper: init.clone(),
        },
        ComparisonCase {
            name: "scaled 1.5 capped".into(),
            lower: init.clone(),
            upper: init.scaled_capped(1.5, spec),
        },
    ]
}

/// Runs each pair and checks ordering of fronts and of the fields on the
/// overlap at every output time of `solver`, plus the capacity bound on
/// every snapshot.
pub fn comparison_suite(spec: &ModelSpec, cases: &[ComparisonCase], solver: &SolverConfig, tol: f64) -> Result<Report> {
    if solver.output_times.is_empty() {
        return Err(Error::Validation("comparison suite needs output times".into()));
    }
    let runs = cases
        .par_iter()
        .map(|c| Ok((simulate(spec, &c.lower, solver)?, simulate(spec, &c.upper, solver)?)))
        .collect::<Result<Vec<(Trajectory, Trajectory)>>>()?;
    let mut report = Report::default();
    for (case, (lo, up)) in cases.iter().zip(&runs) {
        let name = &case.name;
        report.push(Check::at_least(
            format!("{name}: snapshot count"),
            lo.snapshots.len().min(up.snapshots.len()) as f64,
            solver.output_times.len() as f64,
        ));
        let mut front_gap = f64::NEG_INFINITY;
        let mut field_gap = f64::NEG_INFINITY;
        for (a, b) in lo.snapshots.iter().zip(&up.snapshots) {
            front_gap = front_gap.max(a.geom.h - b.geom.h).max(b.geom.g - a.geom.g);
            for (j, x) in a.x_grid().into_iter().enumerate() {
                let (u, v) = b.value_at(x);
                field_gap = field_gap.max(a.m[j] - u).max(a.n[j] - v);
            }
        }
        report.push(Check::at_most(format!("{name}: fronts ordered"), front_gap, tol));
        report.push(Check::at_most(format!("{name}: fields ordered"), field_gap, tol));
        if case.lower == case.upper {
            let diff = lo
                .snapshots
                .iter()
                .zip(&up.snapshots)
                .flat_map(|(a, b)| a.m.iter().zip(&b.m).chain(a.n.iter().zip(&b.n)))
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            report.push(Check::at_most(format!("{name}: runs agree exactly"), diff, 0.0));
        }
        let excess = lo
            .snapshots
            .iter()
            .chain(&up.snapshots)
            .map(|s| (s.sup_m() / spec.bird_capacity).max(s.sup_n() / spec.mosquito_capacity) - 1.0)
            .fold(f64::NEG_INFINITY, f64::max);
        report.push(Check::at_most(format!("{name}: capacity upper solution"), excess, 1e-8));
    }
    Ok(report)
}

/// Runs the same data at each `mu` (ascending) and checks that `h` is
/// nondecreasing and `g` nonincreasing in `mu` at every shared output time.
pub fn mu_monotonicity(
    spec: &ModelSpec,
    init: &InitialData,
    mus: &[f64],
    solver: &SolverConfig,
    tol: f64,
) -> Result<Report> {
    if mus.len() < 2 || mus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("mu values must be strictly increasing, at least 2".into()));
    }
    if solver.output_times.is_empty() {
        return Err(Error::Validation("mu monotonicity needs output times".into()));
    }
    let runs = mus
        .par_iter()
        .map(|&mu| simulate(&spec.with_mu(mu), init, solver))
        .collect::<Result<Vec<Trajectory>>>()?;
    let mut report = Report::default();
    for (w, pair) in runs.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let shared = a.snapshots.len().min(b.snapshots.len());
        let gap = a
            .snapshots
            .iter()
            .zip(&b.snapshots)
            .map(|(p, q)| (p.geom.h - q.geom.h).max(q.geom.g - p.geom.g))
            .fold(f64::NEG_INFINITY, f64::max);
        report.push(Check::at_least(
            format!("mu {} vs {}: shared output times", mus[w], mus[w + 1]),
            shared as f64,
            solver.output_times.len() as f64,
        ));
        report.push(Check::at_most(
            format!("mu {} vs {}: fronts monotone in mu", mus[w], mus[w + 1]),
            gap,
            tol,
        ));
    }
    Ok(report)
}

/// Almost-period candidates of a uniformly sampled signal: local maxima of
/// the autocorrelation of the linearly detrended signal, strongest first.
pub fn almost_period_candidates(samples: &[f64], dt: f64) -> Vec<f64> {
    let n = samples.len();
    if n < 8 {
        return Vec::new();
    }
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mt = t.iter().sum::<f64>() / n as f64;
    let my = samples.iter().sum::<f64>() / n as f64;
    let (num, den) = t
        .iter()
        .zip(samples)
        .fold((0.0, 0.0), |(a, b), (&ti, &yi)| (a + (ti - mt) * (yi - my), b + (ti - mt) * (ti - mt)));
    let slope = num / den;
    let r: Vec<f64> = samples
        .iter()
        .zip(&t)
        .map(|(&y, &ti)| y - my - slope * (ti - mt))
        .collect();
    let var: f64 = r.iter().map(|v| v * v).sum();
    let scale = samples.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if var <= (1e-12 * scale).powi(2) * n as f64 {
        return Vec::new();
    }
    let max_lag = n / 2;
    let acf: Vec<f64> = (0..=max_lag)
        .map(|k| {
            let s: f64 = r[..n - k].iter().zip(&r[k..]).map(|(a, b)| a * b).sum();
            s / var * n as f64 / (n - k) as f64
        })
        .collect();
    let Some(first_neg) = acf.iter().position(|&c| c < 0.0) else {
        return Vec::new();
    };
    let mut peaks: Vec<(f64, f64)> = (first_neg.max(1)..max_lag)
        .filter(|&k| acf[k] > 0.0 && acf[k] >= acf[k - 1] && acf[k] > acf[k + 1])
        .map(|k| {
            // parabolic refinement of the peak location
            let (a, b, c) = (acf[k - 1], acf[k], acf[k + 1]);
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            ((k as f64 + shift) * dt, b)
        })
        .collect();
    peaks.sort_by(|p, q| q.1.total_cmp(&p.1));
    peaks.into_iter().map(|p| p.0).collect()
}

/// `sup |f(t + tau) - f(t)|` over the samples where both are available.
pub fn translation_discrepancy(samples: &[f64], dt: f64, tau: f64) -> f64 {
    let lag = tau / dt;
    let k = lag.floor() as usize;
    let w = lag - k as f64;
    if k + 1 >= samples.len() {
        return f64::INFINITY;
    }
    (0..samples.len() - k - 1)
        .map(|i| {
            let shifted = samples[i + k] * (1.0 - w) + samples[i + k + 1] * w;
            (shifted - samples[i]).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub x: f64,
    /// `inf U`, `inf V` at `x` over the last 20% of the horizon.
    pub floor_u: f64,
    pub floor_v: f64,
    /// `max U - min U` over the tail half.
    pub tail_variation: f64,
    /// Best translation among the autocorrelation candidates.
    pub best_period: Option<f64>,
    /// Discrepancy under `best_period`, or `tail_variation` when there is none.
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlmostPeriodReport {
    pub probes: Vec<ProbeReport>,
    pub report: Report,
}

pub const PROBE_POINTS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// Resampling step for the probe series.
const PROBE_DT: f64 = 0.05;

/// Runs `spec` with probes at `x in {0, +-1, +-2}` and analyses the tail.
pub fn spreading_state_probe(spec: &ModelSpec, init: &InitialData, solver: &SolverConfig) -> Result<AlmostPeriodReport> {
    let mut cfg = solver.clone();
    cfg.probes = PROBE_POINTS.to_vec();
    let traj = simulate(spec, init, &cfg)?;
    probe_analysis(&traj)
}

/// Tail floor and translation analysis of the probe series of `traj`.
pub fn probe_analysis(traj: &Trajectory) -> Result<AlmostPeriodReport> {
    if traj.probe_series.len() < 2 || traj.probes.is_empty() {
        return Err(Error::EmptyData("probe series"));
    }
    let t_last = traj.probe_series.last().unwrap().t;
    let floor_from = 0.8 * t_last;
    let tail_from = 0.5 * t_last;
    let mut probes = Vec::new();
    let mut report = Report::default();
    for (p, &x) in traj.probes.iter().enumerate() {
        let series: Vec<(f64, f64, f64)> = traj
            .probe_series
            .iter()
            .map(|s| (s.t, s.values[p].0, s.values[p].1))
            .collect();
        let floor_u = series.iter().filter(|s| s.0 >= floor_from).map(|s| s.1).fold(f64::INFINITY, f64::min);
        let floor_v = series.iter().filter(|s| s.0 >= floor_from).map(|s| s.2).fold(f64::INFINITY, f64::min);
        let uniform = resample(&series, tail_from, t_last, PROBE_DT);
        let tail_variation = uniform.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - uniform.iter().copied().fold(f64::INFINITY, f64::min);
        let best = almost_period_candidates(&uniform, PROBE_DT)
            .into_iter()
            .map(|tau| (tau, translation_discrepancy(&uniform, PROBE_DT, tau)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        report.push(Check::at_least(format!("x = {x}: tail floor of U > 0"), floor_u, f64::MIN_POSITIVE));
        report.push(Check::at_least(format!("x = {x}: tail floor of V > 0"), floor_v, f64::MIN_POSITIVE));
        probes.push(ProbeReport {
            x,
            floor_u,
            floor_v,
            tail_variation,
            best_period: best.map(|b| b.0),
            discrepancy: best.map_or(tail_variation, |b| b.1),
        });
    }
    Ok(AlmostPeriodReport { probes, report })
}

/// Linear interpolation of the `U` column onto a uniform grid over `[from, to]`.
fn resample(series: &[(f64, f64, f64)], from: f64, to: f64, dt: f64) -> Vec<f64> {
    let count = ((to - from) / dt).floor() as usize + 1;
    let mut i = 0;
    (0..count)
        .map(|k| {
            let t = from + k as f64 * dt;
            while i + 2 < series.len() && series[i + 1].0 < t {
                i += 1;
            }
            let (a, b) = (series[i], series[i + 1]);
            let w = if b.0 > a.0 { ((t - a.0) / (b.0 - a.0)).clamp(0.0, 1.0) } else { 0.0 };
            a.1 * (1.0 - w) + b.1 * w
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_paper_spec;

    #[test]
    fn manufactured_data_is_dirichlet_compatible() {
        for t in [0.0, 0.5, 3.0] {
            assert!(mms_exact(1.0, t).abs() < 1e-15);
            assert!(mms_exact(-1.0, t).abs() < 1e-15);
        }
    }

    #[test]
    fn manufactured_source_vanishes_for_the_exact_transport() {
        // With reaction and transport both exact, the residual of the
        // transformed equation is zero, so the source equals the residual.
        let spec = default_paper_spec();
        let src = ManufacturedSource { spec: &spec };
        let (y, t) = (0.3, 0.7);
        let g = mms_geometry(t);
        let (sm, _) = src.source(y, t, &g);
        let h = 1e-5;
        let w_t = (mms_exact(y, t + h) - mms_exact(y, t - h)) / (2.0 * h);
        let w_y = (mms_exact(y + h, t) - mms_exact(y - h, t)) / (2.0 * h);
        let w_yy = (mms_exact(y + h, t) - 2.0 * mms_exact(y, t) + mms_exact(y - h, t)) / (h * h);
        let mt = g.metric_terms(y).unwrap();
        let w = mms_exact(y, t);
        let (f1, _) = spec.reaction(g.y_to_x(y).unwrap(), t, w, w);
        let fd = w_t - 3.0 * mt.diffusion_scale * w_yy + mt.drift * w_y - f1;
        assert!((sm - fd).abs() < 1e-4, "{sm} vs {fd}");
    }

    #[test]
    fn needs_three_levels() {
        let spec = default_paper_spec();
        assert!(manufactured_convergence(&spec, &spatial_levels(8, 2, 1.0), 0.1).is_err());
    }

    #[test]
    fn coarse_spatial_study_converges() {
        let spec = default_paper_spec();
        let study = manufactured_convergence(&spec, &spatial_levels(10, 3, 0.5), 0.2).unwrap();
        assert!(study.rows[0].error > study.rows[2].error);
        assert!(study.observed_order() > 1.5, "{:?}", study.rows);
    }

    #[test]
    fn detects_period_of_sinusoid_with_trend() {
        let period = 7.3;
        let dt = 0.05;
        let samples: Vec<f64> = (0..4000)
            .map(|i| {
                let t = i as f64 * dt;
                1.0 + 0.002 * t + 0.3 * (2.0 * PI * t / period).sin()
            })
            .collect();
        let cands = almost_period_candidates(&samples, dt);
        let best = cands
            .iter()
            .copied()
            .min_by(|a, b| {
                translation_discrepancy(&samples, dt, *a).total_cmp(&translation_discrepancy(&samples, dt, *b))
            })
            .unwrap();
        assert!((best - period).abs() < 0.05 * period, "{best}");
    }

    #[test]
    fn constant_signal_has_no_candidates() {
        assert!(almost_period_candidates(&[2.0; 100], 0.1).is_empty());
        assert_eq!(translation_discrepancy(&[2.0; 100], 0.1, 1.0), 0.0);
    }

    #[test]
    fn mu_values_must_increase() {
        let spec = default_paper_spec();
        let cfg = SolverConfig::default();
        let err = mu_monotonicity(&spec, &InitialData::default(), &[0.2, 0.1], &cfg, 1e-8);
        assert!(err.is_err());
    }
}
