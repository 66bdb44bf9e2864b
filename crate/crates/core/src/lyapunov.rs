//! Principal Lyapunov exponent of the linearized cooperative system
//! `I_t = D I_xx + A(x, t) I` on `[-L, L]` with Dirichlet ends.
//!
//! The estimator integrates from a positive sine bump with backward Euler in
//! time and central differences in space, solving the coupled 2x2
//! block-tridiagonal system exactly each step. The sup norm over both
//! components is renormalized whenever it leaves `[renorm_low, renorm_high]`
//! and the log of every rescale is accumulated.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::coefficients::{GridMatrix, MatrixField};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::solver::Trajectory;

/// Number of tail windows used for the slope confidence interval.
const TAIL_WINDOWS: usize = 8;
/// Fraction of the horizon treated as the tail.
const TAIL_FRACTION: f64 = 0.25;
/// Two-sided 95% Student-t quantile with `TAIL_WINDOWS - 1` degrees of freedom.
const T_QUANTILE_7: f64 = 2.364_624_251_6;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Grid cells on `[-L, L]`.
    pub cells: usize,
    pub dt: f64,
    pub horizon: f64,
    pub renorm_low: f64,
    pub renorm_high: f64,
    /// Maximum tail confidence-interval width for a converged estimate.
    pub tol: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            cells: 256,
            dt: 0.01,
            horizon: 2000.0,
            renorm_low: 1e-6,
            renorm_high: 1e6,
            tol: 5e-3,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 4 {
            return Err(Error::Validation("estimator needs at least 4 cells".into()));
        }
        if !(self.dt > 0.0 && self.horizon > self.dt * TAIL_WINDOWS as f64 * 4.0) {
            return Err(Error::Validation(
                "estimator needs dt > 0 and a horizon of many steps".into(),
            ));
        }
        if !(self.renorm_low > 0.0 && self.renorm_low < 1.0 && self.renorm_high > 1.0) {
            return Err(Error::Validation(
                "renormalization window must bracket 1".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Validation("tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    pub horizon: f64,
    pub renorm_count: usize,
    /// 95% interval for the growth rate over the tail windows.
    pub tail_slope_ci: (f64, f64),
    pub converged: bool,
    /// Every renormalization found both components strictly positive inside the interval.
    pub positive_cone: bool,
}

impl LyapunovEstimate {
    pub fn ci_width(&self) -> f64 {
        self.tail_slope_ci.1 - self.tail_slope_ci.0
    }

    /// Upper CI bound, the finite-horizon stand-in for the lim sup.
    pub fn upper(&self) -> f64 {
        self.tail_slope_ci.1
    }
}

/// Larger eigenvalue of `A0 - (pi / 2L)^2 diag(D1, D2)`: the exponent of a
/// constant cooperative matrix on `[-L, L]`, principal Dirichlet mode.
pub fn lyapunov_constant_oracle(a0: [[f64; 2]; 2], half_width: f64, diffusion: (f64, f64)) -> f64 {
    let k = (PI / (2.0 * half_width)).powi(2);
    let m00 = a0[0][0] - k * diffusion.0;
    let m11 = a0[1][1] - k * diffusion.1;
    let half_trace = 0.5 * (m00 + m11);
    let det = m00 * m11 - a0[0][1] * a0[1][0];
    half_trace + (half_trace * half_trace - det).max(0.0).sqrt()
}

/// Initial profile for the estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialProfile {
    /// `sin(pi (x + L) / 2L)` in both components.
    SineBump,
    /// `(sin, sin^2)` bump, used to probe initial-condition independence.
    Skewed,
}

pub fn lyapunov_exponent(
    mat: &dyn MatrixField,
    half_width: f64,
    diffusion: (f64, f64),
    cfg: &EstimatorConfig,
) -> Result<LyapunovEstimate> {
    lyapunov_exponent_from(mat, half_width, diffusion, cfg, InitialProfile::SineBump)
}

pub fn lyapunov_exponent_from(
    mat: &dyn MatrixField,
    half_width: f64,
    diffusion: (f64, f64),
    cfg: &EstimatorConfig,
    profile: InitialProfile,
) -> Result<LyapunovEstimate> {
    cfg.validate()?;
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::Validation(format!(
            "half-width must be positive, got {half_width}"
        )));
    }
    if diffusion.0 < 0.0 || diffusion.1 < 0.0 {
        return Err(Error::Validation("diffusivities must be nonnegative".into()));
    }
    let cells = cfg.cells;
    let dx = 2.0 * half_width / cells as f64;
    let interior = cells - 1;
    let xs: Vec<f64> = (1..cells).map(|j| -half_width + j as f64 * dx).collect();
    let grid: GridMatrix = mat.on_grid(&xs);

    let mut p: Vec<f64> = Vec::with_capacity(interior);
    let mut q: Vec<f64> = Vec::with_capacity(interior);
    for &x in &xs {
        let s = (PI * (x + half_width) / (2.0 * half_width)).sin();
        p.push(s);
        q.push(match profile {
            InitialProfile::SineBump => s,
            InitialProfile::Skewed => s * s,
        });
    }
    let norm0 = sup_norm(&p, &q);
    p.iter_mut().chain(q.iter_mut()).for_each(|v| *v /= norm0);

    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let horizon = steps as f64 * cfg.dt;
    let c1 = diffusion.0 / (dx * dx);
    let c2 = diffusion.1 / (dx * dx);
    let mut solver = BlockSolver::new(interior, c1, c2, cfg.dt);
    let mut coeffs = vec![[0.0; 4]; interior];

    let tail_start_step = ((1.0 - TAIL_FRACTION) * steps as f64).round() as usize;
    let sample_every = ((0.1 / cfg.dt).round() as usize).max(1);
    let mut tail: Vec<(f64, f64)> = Vec::new();
    let mut log_acc = 0.0;
    let mut renorm_count = 0;
    let mut positive_cone = true;

    for k in 1..=steps {
        let t = k as f64 * cfg.dt;
        grid.fill(t, &mut coeffs);
        solver.solve(&coeffs, &mut p, &mut q);
        let norm = sup_norm(&p, &q);
        if !norm.is_finite() {
            return Err(Error::NonFinite { t });
        }
        if norm < cfg.renorm_low || norm > cfg.renorm_high {
            if norm == 0.0 {
                return Err(Error::NonFinite { t });
            }
            positive_cone &= p.iter().chain(q.iter()).all(|&v| v > 0.0);
            log_acc += norm.ln();
            p.iter_mut().chain(q.iter_mut()).for_each(|v| *v /= norm);
            renorm_count += 1;
        }
        if k >= tail_start_step && (k - tail_start_step).is_multiple_of(sample_every) {
            tail.push((t, log_acc + sup_norm(&p, &q).ln()));
        }
    }
    positive_cone &= p.iter().chain(q.iter()).all(|&v| v > 0.0);

    let slopes: Vec<f64> = tail
        .chunks(tail.len().div_ceil(TAIL_WINDOWS).max(2))
        .filter(|w| w.len() >= 2)
        .map(regression_slope)
        .collect();
    let count = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / count;
    let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
    let half = T_QUANTILE_7 * (var / count).sqrt();

    // Tail mean rather than the whole-horizon average, which carries the transient.
    let lambda = implicit_euler_rate(mean, cfg.dt);
    let ci = (
        implicit_euler_rate(mean - half, cfg.dt),
        implicit_euler_rate(mean + half, cfg.dt),
    );
    let converged = ci.1 - ci.0 < cfg.tol && lambda >= ci.0 && lambda <= ci.1;
    Ok(LyapunovEstimate {
        lambda,
        horizon,
        renorm_count,
        tail_slope_ci: ci,
        converged,
        positive_cone,
    })
}

/// Maps the observed per-step log growth rate of backward Euler back to the
/// continuous rate: a mode with rate `l` grows by `1 / (1 - l dt)` per step.
fn implicit_euler_rate(observed: f64, dt: f64) -> f64 {
    -(-observed * dt).exp_m1() / dt
}

fn sup_norm(p: &[f64], q: &[f64]) -> f64 {
    p.iter().chain(q).fold(0.0, |acc, v| acc.max(v.abs()))
}

fn regression_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt) * (t - mt))
    });
    num / den
}

/// Block Thomas solver for
/// `-c z_{i-1} + (I/dt + 2c - A_i) z_i - c z_{i+1} = z_i_old / dt`,
/// with `c = diag(c1, c2)` and `z = (p, q)`.
struct BlockSolver {
    c1: f64,
    c2: f64,
    inv_dt: f64,
    /// Inverses of the eliminated diagonal blocks.
    inv: Vec<[f64; 4]>,
    rp: Vec<f64>,
    rq: Vec<f64>,
}

impl BlockSolver {
    fn new(n: usize, c1: f64, c2: f64, dt: f64) -> Self {
        Self {
            c1,
            c2,
            inv_dt: 1.0 / dt,
            inv: vec![[0.0; 4]; n],
            rp: vec![0.0; n],
            rq: vec![0.0; n],
        }
    }

    fn solve(&mut self, a: &[[f64; 4]], p: &mut [f64], q: &mut [f64]) {
        let n = p.len();
        let (c1, c2) = (self.c1, self.c2);
        let mut prev = [0.0; 4];
        for i in 0..n {
            // diagonal block
            let mut b = [
                self.inv_dt + 2.0 * c1 - a[i][0],
                -a[i][1],
                -a[i][2],
                self.inv_dt + 2.0 * c2 - a[i][3],
            ];
            let mut r = [p[i] * self.inv_dt, q[i] * self.inv_dt];
            if i > 0 {
                // B_i -= L inv(B'_{i-1}) U with L = U = -c
                b[0] -= c1 * prev[0] * c1;
                b[1] -= c1 * prev[1] * c2;
                b[2] -= c2 * prev[2] * c1;
                b[3] -= c2 * prev[3] * c2;
                // r_i -= L inv(B'_{i-1}) r'_{i-1}
                let (rp, rq) = (self.rp[i - 1], self.rq[i - 1]);
                r[0] += c1 * (prev[0] * rp + prev[1] * rq);
                r[1] += c2 * (prev[2] * rp + prev[3] * rq);
            }
            let det = b[0] * b[3] - b[1] * b[2];
            let inv = [b[3] / det, -b[1] / det, -b[2] / det, b[0] / det];
            self.inv[i] = inv;
            self.rp[i] = r[0];
            self.rq[i] = r[1];
            prev = inv;
        }
        // back substitution: z_i = inv_i (r'_i + c z_{i+1})
        let (mut np, mut nq) = (0.0, 0.0);
        for i in (0..n).rev() {
            let inv = self.inv[i];
            let rp = self.rp[i] + c1 * np;
            let rq = self.rq[i] + c2 * nq;
            np = inv[0] * rp + inv[1] * rq;
            nq = inv[2] * rp + inv[3] * rq;
            p[i] = np;
            q[i] = nq;
        }
    }
}

/// One point of a sweep over half-widths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub half_width: f64,
    pub estimate: LyapunovEstimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSweep {
    pub points: Vec<SweepPoint>,
    /// Indices `i` where `lambda[i + 1]` falls below `lambda[i]` by more
    /// than the two CI widths combined.
    pub monotonicity_violations: Vec<usize>,
}

impl LambdaSweep {
    pub fn is_monotone(&self) -> bool {
        self.monotonicity_violations.is_empty()
    }
}

pub fn lambda_sweep(
    mat: &dyn MatrixField,
    diffusion: (f64, f64),
    half_widths: &[f64],
    cfg: &EstimatorConfig,
) -> Result<LambdaSweep> {
    if half_widths.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Validation("sweep half-widths must be sorted ascending".into()));
    }
    let points = half_widths
        .par_iter()
        .map(|&l| {
            lyapunov_exponent(mat, l, diffusion, cfg).map(|estimate| SweepPoint {
                half_width: l,
                estimate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotonicity_violations = points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let slack = w[0].estimate.ci_width() + w[1].estimate.ci_width();
            w[1].estimate.lambda < w[0].estimate.lambda - slack
        })
        .map(|(i, _)| i)
        .collect();
    Ok(LambdaSweep {
        points,
        monotonicity_violations,
    })
}

/// `lambda(t)`: the exponent on the current infected interval, re-centered
/// at its midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaAtTime {
    pub t: f64,
    pub half_width: f64,
    pub center: f64,
    pub estimate: LyapunovEstimate,
}

pub fn lambda_of_t(
    spec: &ModelSpec,
    traj: &Trajectory,
    times: &[f64],
    cfg: &EstimatorConfig,
) -> Result<Vec<LambdaAtTime>> {
    let base = spec.linearization();
    times
        .par_iter()
        .map(|&t| {
            let (g, h) = traj.fronts_at(t).ok_or(Error::OutOfDomain {
                what: "t",
                value: t,
                lo: traj.first().t,
                hi: traj.last().t,
            })?;
            let center = 0.5 * (g + h);
            let half_width = 0.5 * (h - g);
            let mat = base.shifted_x(center);
            let estimate = lyapunov_exponent(&mat, half_width, spec.diffusivities(), cfg)?;
            Ok(LambdaAtTime {
                t,
                half_width,
                center,
                estimate,
            })
        })
        .collect()
}

/// Whether a `lambda(t)` series is nondecreasing up to the CI widths.
pub fn nondecreasing_within_ci(series: &[LambdaAtTime]) -> bool {
    series.windows(2).all(|w| {
        let slack = w[0].estimate.ci_width() + w[1].estimate.ci_width();
        w[1].estimate.lambda >= w[0].estimate.lambda - slack
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::ConstantMatrix;

    fn quick() -> EstimatorConfig {
        EstimatorConfig {
            cells: 64,
            dt: 0.01,
            horizon: 200.0,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn oracle_examples() {
        assert!(lyapunov_constant_oracle([[-1.0, 1.0], [1.0, -1.0]], 1.0, (0.0, 0.0)).abs() < 1e-15);
        let l = lyapunov_constant_oracle([[-1.0, 0.0], [0.0, -2.0]], PI / 2.0, (1.0, 1.0));
        assert!((l + 2.0).abs() < 1e-14);
        let l = lyapunov_constant_oracle([[-1.0, 2.0], [3.0, -2.0]], 1.0, (0.0, 0.0));
        assert!((l - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_matches_eigen_routine() {
        // Characteristic polynomial root check for the coupled example.
        let m = [[-1.0, 2.0], [3.0, -2.0]];
        let l = lyapunov_constant_oracle(m, 1.0, (0.0, 0.0));
        let charpoly = (m[0][0] - l) * (m[1][1] - l) - m[0][1] * m[1][0];
        assert!(charpoly.abs() < 1e-12);
    }

    #[test]
    fn decoupled_decay_rate() {
        let mat = ConstantMatrix::new([[-1.0, 0.0], [0.0, -1.0]]).unwrap();
        let l = 2.0;
        let d = (0.5, 0.2);
        let est = lyapunov_exponent(&mat, l, d, &quick()).unwrap();
        let k = (PI / (2.0 * l)).powi(2);
        let expected = (-1.0 - d.0 * k).max(-1.0 - d.1 * k);
        assert!((est.lambda - expected).abs() < 1e-3, "{} vs {expected}", est.lambda);
        assert!(est.positive_cone);
        assert!(est.renorm_count > 0);
    }

    #[test]
    fn coupled_constant_matches_oracle() {
        let a0 = [[-0.5, 0.8], [1.2, -0.3]];
        let mat = ConstantMatrix::new(a0).unwrap();
        let est = lyapunov_exponent(&mat, 1.5, (1.0, 0.3), &quick()).unwrap();
        let oracle = lyapunov_constant_oracle(a0, 1.5, (1.0, 0.3));
        assert!((est.lambda - oracle).abs() < 2e-3, "{} vs {oracle}", est.lambda);
        assert!(est.converged);
    }

    #[test]
    fn initial_profile_does_not_matter() {
        let a0 = [[-0.5, 0.8], [1.2, -0.3]];
        let mat = ConstantMatrix::new(a0).unwrap();
        let a = lyapunov_exponent_from(&mat, 1.0, (1.0, 0.3), &quick(), InitialProfile::SineBump).unwrap();
        let b = lyapunov_exponent_from(&mat, 1.0, (1.0, 0.3), &quick(), InitialProfile::Skewed).unwrap();
        assert!((a.lambda - b.lambda).abs() <= a.ci_width() + b.ci_width() + 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        let mat = ConstantMatrix::new([[-1.0, 0.0], [0.0, -1.0]]).unwrap();
        assert!(lyapunov_exponent(&mat, 0.0, (1.0, 1.0), &quick()).is_err());
        assert!(lambda_sweep(&mat, (1.0, 1.0), &[2.0, 1.0], &quick()).is_err());
    }

    #[test]
    fn implicit_euler_correction_inverts_growth() {
        let l: f64 = 0.7;
        let dt = 0.01;
        let observed = -(1.0 - l * dt).ln() / dt;
        assert!((implicit_euler_rate(observed, dt) - l).abs() < 1e-12);
    }
}
