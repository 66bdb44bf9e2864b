//! Implicit finite-difference integration of the front-fixed system.
//!
//! Each step freezes the geometry coefficients at the start of the step,
//! solves both species with backward Euler and central differences while
//! lagging the cross-variable in the reaction terms (one tridiagonal solve
//! per species), repeats that Gauss-Seidel sweep until the coupled residual
//! is below tolerance, and finally moves the fronts with the Stefan rule.

use crate::error::{Error, Result};
use crate::model::{InitialData, ModelSpec};
use crate::transform::FrontGeometry;
use crate::tridiag;

/// Undershoots in `[-NEG_CLIP, 0)` are rounding noise and get clipped.
pub const NEG_CLIP: f64 = 1e-10;
/// Relative tolerance above the capacities.
pub const CAP_TOL: f64 = 1e-8;
/// Heat-map rows are downsampled to at most this many cells.
pub const RASTER_MAX_CELLS: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMode {
    ClipTiny,
    RejectStep,
}

impl BoundMode {
    pub fn name(self) -> &'static str {
        match self {
            BoundMode::ClipTiny => "clip_tiny",
            BoundMode::RejectStep => "reject_step",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "clip_tiny" => Some(BoundMode::ClipTiny),
            "reject_step" => Some(BoundMode::RejectStep),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Number of grid cells J on `[-1, 1]`.
    pub cells: usize,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Tolerance on the coupled residual, in density units.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Times at which full snapshots are stored; the stepper lands on them exactly.
    pub output_times: Vec<f64>,
    pub bound_mode: BoundMode,
    /// Fixed physical positions at which `(U, V)` is recorded every step.
    pub probes: Vec<f64>,
    /// Number of space-time raster rows to keep for heat maps (0 disables).
    pub raster_rows: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cells: 400,
            dt0: 0.01,
            dt_min: 1e-6,
            dt_max: 0.05,
            t_end: 300.0,
            newton_tol: 1e-10,
            max_newton: 50,
            output_times: Vec::new(),
            bound_mode: BoundMode::ClipTiny,
            probes: Vec::new(),
            raster_rows: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 16 {
            return Err(Error::Validation(format!("J must be >= 16, got {}", self.cells)));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt0 && self.dt0 <= self.dt_max) {
            return Err(Error::Validation(format!(
                "time steps must satisfy 0 < dt_min <= dt0 <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt0, self.dt_max
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Validation("t_end must be positive".into()));
        }
        if !(self.newton_tol > 0.0) || self.max_newton == 0 {
            return Err(Error::Validation(
                "newton_tol must be positive and max_newton at least 1".into(),
            ));
        }
        if self.output_times.windows(2).any(|w| w[1] <= w[0])
            || self.output_times.iter().any(|&t| !(0.0..=self.t_end).contains(&t))
        {
            return Err(Error::Validation(
                "output_times must be strictly increasing within [0, t_end]".into(),
            ));
        }
        Ok(())
    }

    /// Snapshot times `0, every, 2 every, ...` up to `t_end`.
    pub fn with_uniform_outputs(mut self, every: f64) -> Self {
        let count = (self.t_end / every + 1e-9).floor() as usize;
        self.output_times = (0..=count).map(|k| k as f64 * every).collect();
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Solution snapshot in fixed coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontState {
    pub t: f64,
    /// Bird densities at `y_j = -1 + 2 j / J`, `j = 0..=J`.
    pub m: Vec<f64>,
    /// Mosquito densities on the same grid.
    pub n: Vec<f64>,
    pub geom: FrontGeometry,
}

impl FrontState {
    /// State at `t = 0` with fronts at `-h0, h0` and velocities from the
    /// Stefan rule applied to the initial bird profile.
    pub fn initial(spec: &ModelSpec, init: &InitialData, cells: usize) -> Result<Self> {
        spec.validate()?;
        init.validate(spec)?;
        let y: Vec<f64> = (0..=cells).map(|j| grid_y(j, cells)).collect();
        let (m, n) = init.sample(&y);
        let mut state = Self {
            t: 0.0,
            m,
            n,
            geom: FrontGeometry::new(-spec.h0, spec.h0, 0.0, 0.0)?,
        };
        let (gdot, hdot) = stefan_velocities(&state, spec.mu);
        state.geom.gdot = gdot;
        state.geom.hdot = hdot;
        Ok(state)
    }

    pub fn cells(&self) -> usize {
        self.m.len() - 1
    }

    pub fn dy(&self) -> f64 {
        2.0 / self.cells() as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        grid_y(j, self.cells())
    }

    pub fn y_grid(&self) -> Vec<f64> {
        (0..=self.cells()).map(|j| self.y(j)).collect()
    }

    pub fn x_grid(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = (0..=self.cells())
            .map(|j| self.geom.y_to_x_unchecked(self.y(j)))
            .collect();
        // pin the endpoints to the fronts exactly
        xs[0] = self.geom.g;
        *xs.last_mut().unwrap() = self.geom.h;
        xs
    }

    /// Second-order one-sided estimate of `m_y` at `y = -1` or `y = 1`.
    pub fn boundary_derivative(&self, side: Side) -> f64 {
        let j = self.cells();
        let dy = self.dy();
        match side {
            Side::Right => (3.0 * self.m[j] - 4.0 * self.m[j - 1] + self.m[j - 2]) / (2.0 * dy),
            Side::Left => (-3.0 * self.m[0] + 4.0 * self.m[1] - self.m[2]) / (2.0 * dy),
        }
    }

    pub fn sup_m(&self) -> f64 {
        self.m.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_n(&self) -> f64 {
        self.n.iter().copied().fold(0.0, f64::max)
    }

    /// `(int U dx, int V dx)` by the trapezoidal rule.
    pub fn masses(&self) -> (f64, f64) {
        let jac = 0.5 * self.geom.width() * self.dy();
        let trap = |v: &[f64]| {
            let inner: f64 = v[1..v.len() - 1].iter().sum();
            jac * (inner + 0.5 * (v[0] + v[v.len() - 1]))
        };
        (trap(&self.m), trap(&self.n))
    }

    /// Linear interpolation of `(U, V)` at physical position `x`; zero outside `[g, h]`.
    pub fn value_at(&self, x: f64) -> (f64, f64) {
        if !(self.geom.g..=self.geom.h).contains(&x) {
            return (0.0, 0.0);
        }
        let y = ((2.0 * x - (self.geom.h + self.geom.g)) / self.geom.width()).clamp(-1.0, 1.0);
        let s = (y + 1.0) / self.dy();
        let i = (s.floor() as usize).min(self.cells() - 1);
        let w = s - i as f64;
        (
            self.m[i] * (1.0 - w) + self.m[i + 1] * w,
            self.n[i] * (1.0 - w) + self.n[i + 1] * w,
        )
    }
}

#[inline]
fn grid_y(j: usize, cells: usize) -> f64 {
    -1.0 + 2.0 * j as f64 / cells as f64
}

/// `(g', h')` from the Stefan rule; fronts never retreat.
fn stefan_velocities(state: &FrontState, mu: f64) -> (f64, f64) {
    let scale = -mu * 2.0 / state.geom.width();
    let hdot = (scale * state.boundary_derivative(Side::Right)).max(0.0);
    let gdot = (scale * state.boundary_derivative(Side::Left)).min(0.0);
    (gdot, hdot)
}

/// Source terms added to the right-hand sides, used by manufactured-solution studies.
pub(crate) trait Forcing {
    /// `(s_m, s_n)` at fixed coordinate `y`, time `t`, for geometry `geom`.
    fn source(&self, y: f64, t: f64, geom: &FrontGeometry) -> (f64, f64);
}

pub(crate) enum GeometryRule<'a> {
    Stefan { mu: f64 },
    Prescribed(&'a dyn Fn(f64) -> FrontGeometry),
}

pub(crate) struct StepOptions<'a> {
    pub geometry: GeometryRule<'a>,
    pub forcing: Option<&'a dyn Forcing>,
    pub check_bounds: bool,
}

/// Reusable buffers for one grid size.
pub(crate) struct Stepper {
    lower: Vec<f64>,
    upper: Vec<f64>,
    diag_m: Vec<f64>,
    diag_n: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    src_m: Vec<f64>,
    src_n: Vec<f64>,
    lower_n: Vec<f64>,
    upper_n: Vec<f64>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl Stepper {
    pub(crate) fn new(cells: usize) -> Self {
        let k = cells - 1;
        let z = || vec![0.0; k];
        Self {
            lower: z(),
            upper: z(),
            diag_m: z(),
            diag_n: z(),
            a1: z(),
            a2: z(),
            d1: z(),
            d2: z(),
            src_m: z(),
            src_n: z(),
            lower_n: z(),
            upper_n: z(),
            diag: z(),
            rhs: z(),
            scratch: z(),
        }
    }

    pub(crate) fn advance(
        &mut self,
        spec: &ModelSpec,
        state: &FrontState,
        dt: f64,
        cfg: &SolverConfig,
        opts: &StepOptions<'_>,
    ) -> Result<FrontState> {
        let cells = state.cells();
        let k = cells - 1;
        let geom = state.geom;
        let t1 = state.t + dt;
        let diff_scale = 4.0 / (geom.width() * geom.width());
        let (n1, n2) = (spec.bird_capacity, spec.mosquito_capacity);

        for i in 0..k {
            let y = state.y(i + 1);
            let x = geom.y_to_x_unchecked(y);
            let r = spec.rates(x, t1);
            self.a1[i] = r.a1;
            self.a2[i] = r.a2;
            self.d1[i] = r.d1;
            self.d2[i] = r.d2;
            let (sm, sn) = match opts.forcing {
                Some(f) => f.source(y, t1, &geom),
                None => (0.0, 0.0),
            };
            self.src_m[i] = sm;
            self.src_n[i] = sn;
        }
        transport_rows(
            spec.bird_diffusivity * diff_scale,
            &geom,
            state,
            dt,
            &mut self.lower,
            &mut self.upper,
            &mut self.diag_m,
        );
        transport_rows(
            spec.mosquito_diffusivity * diff_scale,
            &geom,
            state,
            dt,
            &mut self.lower_n,
            &mut self.upper_n,
            &mut self.diag_n,
        );

        let mut m = state.m.clone();
        let mut n = state.n.clone();
        m[0] = 0.0;
        m[cells] = 0.0;
        n[0] = 0.0;
        n[cells] = 0.0;
        let inv_dt = 1.0 / dt;
        let mut residual = f64::INFINITY;
        let mut converged = false;
        let mut n_lag = vec![0.0; k];
        for _ in 0..cfg.max_newton {
            n_lag.copy_from_slice(&n[1..cells]);
            // birds, with mosquitoes lagged
            for i in 0..k {
                self.diag[i] = self.diag_m[i] + self.a1[i] * n_lag[i] + self.d1[i];
                self.rhs[i] = state.m[i + 1] * inv_dt + self.a1[i] * n1 * n_lag[i] + self.src_m[i];
            }
            tridiag::solve_in_place(&self.lower, &self.diag, &self.upper, &mut self.rhs, &mut self.scratch);
            m[1..cells].copy_from_slice(&self.rhs);
            // mosquitoes, with the fresh birds
            for i in 0..k {
                let mi = m[i + 1];
                self.diag[i] = self.diag_n[i] + self.a2[i] * mi + self.d2[i];
                self.rhs[i] = state.n[i + 1] * inv_dt + self.a2[i] * n2 * mi + self.src_n[i];
            }
            tridiag::solve_in_place(&self.lower_n, &self.diag, &self.upper_n, &mut self.rhs, &mut self.scratch);
            n[1..cells].copy_from_slice(&self.rhs);

            // The mosquito rows hold exactly; the bird rows are off by the lag.
            residual = (0..k)
                .map(|i| dt * (self.a1[i] * (n1 - m[i + 1]) * (n[i + 1] - n_lag[i])).abs())
                .fold(0.0, f64::max);
            if !residual.is_finite() {
                return Err(Error::NonFinite { t: t1 });
            }
            if residual < cfg.newton_tol {
                converged = true;
                break;
            }
        }
        if m.iter().chain(n.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t1 });
        }
        if !converged {
            return Err(Error::NoConvergence {
                iterations: cfg.max_newton,
                residual,
            });
        }
        if opts.check_bounds {
            enforce_bounds(&mut m, n1, cfg.bound_mode, t1)?;
            enforce_bounds(&mut n, n2, cfg.bound_mode, t1)?;
        }

        let mut next = FrontState {
            t: t1,
            m,
            n,
            geom,
        };
        next.geom = match &opts.geometry {
            GeometryRule::Stefan { mu } => {
                let (gdot, hdot) = stefan_velocities(&next, *mu);
                FrontGeometry {
                    g: geom.g + dt * gdot,
                    h: geom.h + dt * hdot,
                    gdot,
                    hdot,
                }
            }
            GeometryRule::Prescribed(f) => f(t1),
        };
        if !(next.geom.g.is_finite() && next.geom.h.is_finite()) {
            return Err(Error::NonFinite { t: t1 });
        }
        Ok(next)
    }
}

/// Fills the diffusion/drift part of the interior rows for one species:
/// `lower m_{j-1} + diag m_j + upper m_{j+1}`, with `1/dt` already on the diagonal.
/// Central differences are used while the row stays an M-matrix row, upwinding otherwise.
fn transport_rows(
    diffusion: f64,
    geom: &FrontGeometry,
    state: &FrontState,
    dt: f64,
    lower: &mut [f64],
    upper: &mut [f64],
    diag: &mut [f64],
) {
    let dy = state.dy();
    let c = diffusion / (dy * dy);
    for i in 0..lower.len() {
        let b = geom.drift_unchecked(state.y(i + 1));
        let half = b / (2.0 * dy);
        if half.abs() <= c {
            lower[i] = -c - half;
            upper[i] = -c + half;
            diag[i] = 1.0 / dt + 2.0 * c;
        } else if b > 0.0 {
            lower[i] = -c - b / dy;
            upper[i] = -c;
            diag[i] = 1.0 / dt + 2.0 * c + b / dy;
        } else {
            lower[i] = -c;
            upper[i] = -c + b / dy;
            diag[i] = 1.0 / dt + 2.0 * c - b / dy;
        }
    }
    lower[0] = 0.0;
    let last = upper.len() - 1;
    upper[last] = 0.0;
}

fn enforce_bounds(v: &mut [f64], cap: f64, mode: BoundMode, t: f64) -> Result<()> {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > cap * (1.0 + CAP_TOL) {
        return Err(Error::BoundViolation {
            t,
            amount: max - cap,
        });
    }
    if min < 0.0 {
        if mode == BoundMode::RejectStep || min < -NEG_CLIP {
            return Err(Error::BoundViolation { t, amount: -min });
        }
        v.iter_mut().for_each(|s| *s = s.max(0.0));
    }
    Ok(())
}

/// One step of the free-boundary system with the Stefan rule.
pub fn step(spec: &ModelSpec, state: &FrontState, dt: f64, cfg: &SolverConfig) -> Result<FrontState> {
    if state.cells() < 3 {
        return Err(Error::Validation("need at least 3 cells".into()));
    }
    let opts = StepOptions {
        geometry: GeometryRule::Stefan { mu: spec.mu },
        forcing: None,
        check_bounds: true,
    };
    Stepper::new(state.cells()).advance(spec, state, dt, cfg, &opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Blowup,
    StepFloor,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Blowup => "blowup",
            RunStatus::StepFloor => "step_floor",
        }
    }
}

/// Per-step record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    pub gdot: f64,
    pub hdot: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub mass_u: f64,
    pub mass_v: f64,
}

impl Summary {
    fn of(state: &FrontState) -> Self {
        let (mass_u, mass_v) = state.masses();
        Self {
            t: state.t,
            g: state.geom.g,
            h: state.geom.h,
            gdot: state.geom.gdot,
            hdot: state.geom.hdot,
            sup_u: state.sup_m(),
            sup_v: state.sup_n(),
            mass_u,
            mass_v,
        }
    }

    pub fn width(&self) -> f64 {
        self.h - self.g
    }
}

/// `(U, V)` at the configured probe positions at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSample {
    pub t: f64,
    pub values: Vec<(f64, f64)>,
}

/// Downsampled bird density row for space-time plots.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterRow {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub summaries: Vec<Summary>,
    pub snapshots: Vec<FrontState>,
    pub status: RunStatus,
    pub probes: Vec<f64>,
    pub probe_series: Vec<ProbeSample>,
    pub raster: Vec<RasterRow>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Horizon requested by the configuration.
    pub t_end: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Summary {
        self.summaries.last().expect("trajectory has the initial summary")
    }

    pub fn first(&self) -> &Summary {
        &self.summaries[0]
    }

    /// Front positions interpolated linearly in time.
    pub fn fronts_at(&self, t: f64) -> Option<(f64, f64)> {
        let s = &self.summaries;
        if t < s[0].t || t > self.last().t {
            return None;
        }
        let i = s.partition_point(|r| r.t < t);
        if i == 0 {
            return Some((s[0].g, s[0].h));
        }
        let (a, b) = (&s[i - 1], &s[i]);
        let w = (t - a.t) / (b.t - a.t);
        Some((a.g + w * (b.g - a.g), a.h + w * (b.h - a.h)))
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&FrontState> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(1.0))
    }
}

/// Integrates from `t = 0` to `cfg.t_end` with step-size control.
///
/// Only invalid inputs return `Err`; numerical failure ends the run with the
/// corresponding [`RunStatus`].
pub fn simulate(spec: &ModelSpec, init: &InitialData, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let state = FrontState::initial(spec, init, cfg.cells)?;
    let opts = StepOptions {
        geometry: GeometryRule::Stefan { mu: spec.mu },
        forcing: None,
        check_bounds: true,
    };
    Ok(integrate(spec, state, cfg, &opts))
}

pub(crate) fn integrate(
    spec: &ModelSpec,
    mut state: FrontState,
    cfg: &SolverConfig,
    opts: &StepOptions<'_>,
) -> Trajectory {
    let mut stepper = Stepper::new(state.cells());
    let mut traj = Trajectory {
        summaries: vec![Summary::of(&state)],
        snapshots: Vec::new(),
        status: RunStatus::Completed,
        probes: cfg.probes.clone(),
        probe_series: Vec::new(),
        raster: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
        t_end: cfg.t_end,
    };
    let mut outputs = cfg.output_times.iter().copied().peekable();
    let raster_every = if cfg.raster_rows > 0 {
        cfg.t_end / cfg.raster_rows as f64
    } else {
        f64::INFINITY
    };
    let mut next_raster = 0.0;
    let record = |traj: &mut Trajectory, state: &FrontState, next_raster: &mut f64| {
        if !traj.probes.is_empty() {
            traj.probe_series.push(ProbeSample {
                t: state.t,
                values: traj.probes.iter().map(|&x| state.value_at(x)).collect(),
            });
        }
        if state.t >= *next_raster - 1e-12 {
            traj.raster.push(raster_row(state));
            *next_raster += raster_every;
        }
    };
    while outputs.peek().is_some_and(|&t| t <= 0.0) {
        traj.snapshots.push(state.clone());
        outputs.next();
    }
    record(&mut traj, &state, &mut next_raster);

    let eps = 1e-12 * cfg.t_end.max(1.0);
    let mut dt = cfg.dt0;
    let mut streak = 0usize;
    while state.t < cfg.t_end - eps {
        let target = outputs.peek().copied().unwrap_or(cfg.t_end).min(cfg.t_end);
        let remaining = target - state.t;
        let (h, lands) = if dt >= remaining - eps {
            (remaining, true)
        } else {
            (dt, false)
        };
        match stepper.advance(spec, &state, h, cfg, opts) {
            Ok(mut next) => {
                if lands {
                    next.t = target;
                }
                state = next;
                traj.accepted_steps += 1;
                traj.summaries.push(Summary::of(&state));
                if lands && outputs.peek().is_some_and(|&t| (t - state.t).abs() <= eps) {
                    traj.snapshots.push(state.clone());
                    outputs.next();
                }
                record(&mut traj, &state, &mut next_raster);
                streak += 1;
                if streak >= 5 {
                    dt = (dt * 1.2).min(cfg.dt_max);
                    streak = 0;
                }
            }
            Err(Error::NonFinite { .. }) => {
                traj.status = RunStatus::Blowup;
                break;
            }
            Err(_) => {
                traj.rejected_steps += 1;
                streak = 0;
                dt = h * 0.5;
                if dt < cfg.dt_min {
                    traj.status = RunStatus::StepFloor;
                    break;
                }
            }
        }
    }
    traj
}

fn raster_row(state: &FrontState) -> RasterRow {
    let len = state.m.len();
    let bins = len.min(RASTER_MAX_CELLS);
    let u = (0..bins)
        .map(|b| {
            let lo = b * len / bins;
            let hi = ((b + 1) * len / bins).max(lo + 1);
            state.m[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    RasterRow {
        t: state.t,
        g: state.geom.g,
        h: state.geom.h,
        u,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientField;
    use crate::model::default_paper_spec;
    use std::f64::consts::PI;

    fn constant_spec(d1: f64, recovery: f64, a: f64) -> ModelSpec {
        let c = |v: f64| CoefficientField::constant(v).unwrap();
        ModelSpec {
            bird_diffusivity: d1,
            mosquito_diffusivity: d1,
            bird_capacity: 1.0,
            mosquito_capacity: 1.0,
            biting_rate: 1.0,
            alpha1: c(a),
            alpha2: c(a),
            recovery: c(recovery),
            mosquito_death: c(recovery),
            mu: 1.0,
            h0: 1.0,
        }
    }

    fn state_from(cells: usize, f: impl Fn(f64) -> f64) -> FrontState {
        let m: Vec<f64> = (0..=cells).map(|j| f(grid_y(j, cells))).collect();
        FrontState {
            t: 0.0,
            n: vec![0.0; cells + 1],
            m,
            geom: FrontGeometry::symmetric(1.0).unwrap(),
        }
    }

    #[test]
    fn boundary_derivative_examples() {
        let zero = state_from(32, |_| 0.0);
        assert_eq!(zero.boundary_derivative(Side::Right), 0.0);
        let quad = state_from(32, |y| 1.0 - y * y);
        assert!((quad.boundary_derivative(Side::Right) + 2.0).abs() < 1e-12);
        assert!((quad.boundary_derivative(Side::Left) - 2.0).abs() < 1e-12);

        // O(dy^2): halving dy quarters the error.
        let err = |cells| {
            let s = state_from(cells, |y| (PI * (1.0 - y) / 2.0).sin());
            (s.boundary_derivative(Side::Right) + PI / 2.0).abs()
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e1 < 1e-2);
        assert!((e1 / e2 - 4.0).abs() < 0.1, "ratio {}", e1 / e2);
    }

    #[test]
    fn zero_state_is_preserved() {
        let spec = default_paper_spec();
        let init = InitialData::CosineBump { amp_u: 0.0, amp_v: 0.0 };
        let s0 = FrontState::initial(&spec, &init, 64).unwrap();
        let s1 = step(&spec, &s0, 0.05, &SolverConfig::default()).unwrap();
        assert!(s1.m.iter().chain(s1.n.iter()).all(|&v| v == 0.0));
        assert_eq!((s1.geom.g, s1.geom.h), (-1.0, 1.0));
        assert_eq!((s1.geom.gdot, s1.geom.hdot), (0.0, 0.0));
    }

    #[test]
    fn pure_decay_matches_single_mode() {
        // a1 = a2 = 0 is not a valid field, so use a vanishing transmission
        // with zero mosquitoes: the coupling term a1 (N1 - m) n is then zero.
        let d1 = 0.5;
        let recovery = 0.3;
        let spec = constant_spec(d1, recovery, 1e-3).with_mu(0.0);
        let cfg = SolverConfig {
            cells: 200,
            dt0: 1e-3,
            dt_max: 1e-3,
            t_end: 1.0,
            ..SolverConfig::default()
        };
        let state = FrontState {
            t: 0.0,
            m: (0..=200).map(|j| (0.5 * PI * grid_y(j, 200)).cos()).collect(),
            n: vec![0.0; 201],
            geom: FrontGeometry::symmetric(1.0).unwrap(),
        };
        let opts = StepOptions {
            geometry: GeometryRule::Stefan { mu: 0.0 },
            forcing: None,
            check_bounds: true,
        };
        let traj = integrate(&spec, state, &cfg, &opts);
        let exact = (-(recovery + d1 * (PI / 2.0).powi(2))).exp();
        let got = traj.last().sup_u;
        assert!((got - exact).abs() < 2e-3, "{got} vs {exact}");
    }

    #[test]
    fn frozen_fronts_keep_symmetry() {
        let spec = constant_spec(1.0, 0.2, 0.5).with_mu(0.0);
        let init = InitialData::CosineBump { amp_u: 0.3, amp_v: 0.6 };
        let cfg = SolverConfig {
            cells: 64,
            t_end: 5.0,
            ..SolverConfig::default()
        };
        let state = FrontState::initial(&spec.with_mu(1.0), &init, 64).unwrap();
        let state = FrontState {
            geom: FrontGeometry::symmetric(1.0).unwrap(),
            ..state
        };
        let opts = StepOptions {
            geometry: GeometryRule::Stefan { mu: 0.0 },
            forcing: None,
            check_bounds: true,
        };
        let cfg = cfg.with_uniform_outputs(1.0);
        let traj = integrate(&spec, state, &cfg, &opts);
        for snap in &traj.snapshots {
            for j in 0..=64 {
                assert!((snap.m[j] - snap.m[64 - j]).abs() < 1e-8);
            }
        }
        assert_eq!(traj.last().h, 1.0);
    }

    #[test]
    fn spreading_regime_front_advances() {
        let spec = default_paper_spec().with_h0(2.0).with_mu(0.1);
        let cfg = SolverConfig {
            t_end: 5.0,
            cells: 200,
            ..SolverConfig::default()
        };
        let traj = simulate(&spec, &InitialData::default(), &cfg).unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        for w in traj.summaries.windows(2) {
            assert!(w[1].h > w[0].h);
            assert!(w[1].g < w[0].g);
        }
    }

    #[test]
    fn outputs_are_hit_exactly() {
        let spec = default_paper_spec();
        let cfg = SolverConfig {
            cells: 64,
            t_end: 2.0,
            dt0: 0.03,
            output_times: vec![0.0, 0.5, 1.25, 2.0],
            ..SolverConfig::default()
        };
        let traj = simulate(&spec, &InitialData::default(), &cfg).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.0, 0.5, 1.25, 2.0]);
        assert_eq!(traj.summaries.len(), traj.accepted_steps + 1);
        assert!(traj.summaries.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            cells: 8,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            dt_min: 0.1,
            dt0: 0.01,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
