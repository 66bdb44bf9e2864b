//! Model parameters, reaction terms and initial data.

use std::f64::consts::PI;

use crate::coefficients::{CoefficientField, LinearizationMatrix, SpatialProfile, TemporalHarmonic};
use crate::error::{Error, Result};

/// Positivity floor used for the built-in coefficient fields.
pub const FIELD_FLOOR: f64 = 1e-6;

/// The four heterogeneous, almost-periodic rates of the reference experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceFields {
    pub alpha1: CoefficientField,
    pub alpha2: CoefficientField,
    pub gamma: CoefficientField,
    pub death: CoefficientField,
}

pub fn reference_fields() -> ReferenceFields {
    let field = |base, h, amp, profile| {
        CoefficientField::new(base, vec![h], amp, profile, FIELD_FLOOR)
            .expect("reference coefficient fields are positive")
    };
    ReferenceFields {
        alpha1: field(
            0.88,
            TemporalHarmonic::cosine(0.56, 0.5),
            0.088,
            SpatialProfile::Ratio2Cos,
        ),
        alpha2: field(
            0.16,
            TemporalHarmonic::cosine(0.2, PI / 3.0),
            0.024,
            SpatialProfile::Ratio1Cos,
        ),
        gamma: field(
            0.1,
            TemporalHarmonic::sine(0.3, 1.0 / 3.0),
            0.02,
            SpatialProfile::Ratio2Sin,
        ),
        death: field(
            0.029,
            TemporalHarmonic::sine(0.1, PI / 2.0),
            0.0016,
            SpatialProfile::Ratio1Sin,
        ),
    }
}

/// Full parameterization of the free-boundary system.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    /// D1, bird diffusivity.
    pub bird_diffusivity: f64,
    /// D2, mosquito diffusivity.
    pub mosquito_diffusivity: f64,
    /// N1, total bird population.
    pub bird_capacity: f64,
    /// N2, total mosquito population.
    pub mosquito_capacity: f64,
    /// beta, biting rate.
    pub biting_rate: f64,
    /// Transmission probability per bite to birds.
    pub alpha1: CoefficientField,
    /// Transmission probability per bite to mosquitoes.
    pub alpha2: CoefficientField,
    /// Bird recovery rate (d1).
    pub recovery: CoefficientField,
    /// Mosquito death rate (d2).
    pub mosquito_death: CoefficientField,
    /// Front expansion coefficient in the Stefan condition.
    pub mu: f64,
    /// Initial half-width of the infected interval.
    pub h0: f64,
}

/// Pointwise values of the derived rates a1, a2, d1, d2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub a1: f64,
    pub a2: f64,
    pub d1: f64,
    pub d2: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("D1", self.bird_diffusivity),
            ("D2", self.mosquito_diffusivity),
            ("N1", self.bird_capacity),
            ("N2", self.mosquito_capacity),
            ("beta", self.biting_rate),
            ("mu", self.mu),
            ("h0", self.h0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Same model with a different front expansion coefficient. `mu = 0`
    /// (frozen fronts) is allowed here for diagnostic runs.
    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    pub fn with_h0(&self, h0: f64) -> Self {
        Self { h0, ..self.clone() }
    }

    #[inline]
    pub fn rates(&self, x: f64, t: f64) -> Rates {
        let k = self.biting_rate / self.bird_capacity;
        Rates {
            a1: self.alpha1.eval(x, t) * k,
            // a2 is normalized by N1 as well.
            a2: self.alpha2.eval(x, t) * k,
            d1: self.recovery.eval(x, t),
            d2: self.mosquito_death.eval(x, t),
        }
    }

    /// `(f1, f2)` at `(x, t, u, v)`.
    #[inline]
    pub fn reaction(&self, x: f64, t: f64, u: f64, v: f64) -> (f64, f64) {
        let r = self.rates(x, t);
        (
            r.a1 * (self.bird_capacity - u) * v - r.d1 * u,
            r.a2 * (self.mosquito_capacity - v) * u - r.d2 * v,
        )
    }

    /// Jacobian of the reaction terms at the disease-free state.
    pub fn jacobian_at_zero(&self, x: f64, t: f64) -> [[f64; 2]; 2] {
        let r = self.rates(x, t);
        [
            [-r.d1, r.a1 * self.bird_capacity],
            [r.a2 * self.mosquito_capacity, -r.d2],
        ]
    }

    pub fn linearization(&self) -> LinearizationMatrix {
        let k = self.biting_rate / self.bird_capacity;
        LinearizationMatrix::new(
            self.alpha1.scaled(k),
            self.alpha2.scaled(k),
            self.recovery.clone(),
            self.mosquito_death.clone(),
            self.bird_capacity,
            self.mosquito_capacity,
        )
        .expect("validated capacities")
    }

    pub fn diffusivities(&self) -> (f64, f64) {
        (self.bird_diffusivity, self.mosquito_diffusivity)
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        default_paper_spec()
    }
}

/// The reference parameterization with `mu = 0.1` and `h0 = 1.0`.
pub fn default_paper_spec() -> ModelSpec {
    let f = reference_fields();
    ModelSpec {
        bird_diffusivity: 3.0,
        mosquito_diffusivity: 0.125,
        bird_capacity: 1.0,
        mosquito_capacity: 20.0,
        biting_rate: 0.6,
        alpha1: f.alpha1,
        alpha2: f.alpha2,
        recovery: f.gamma,
        mosquito_death: f.death,
        mu: 0.1,
        h0: 1.0,
    }
}

/// Initial densities on `[-h0, h0]`.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// `U0 = amp_u cos(pi x / (2 h0))`, `V0 = amp_v cos(pi x / (2 h0))`.
    CosineBump { amp_u: f64, amp_v: f64 },
    /// Values at equally spaced points of `[-h0, h0]`, endpoints included.
    Sampled { u: Vec<f64>, v: Vec<f64> },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::CosineBump {
            amp_u: 0.1,
            amp_v: 2.0,
        }
    }
}

impl InitialData {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let (n1, n2) = (spec.bird_capacity, spec.mosquito_capacity);
        match self {
            InitialData::CosineBump { amp_u, amp_v } => {
                if !(0.0..=n1).contains(amp_u) {
                    return Err(Error::Validation(format!(
                        "initial bird amplitude {amp_u} must lie in [0, N1 = {n1}]"
                    )));
                }
                if !(0.0..=n2).contains(amp_v) {
                    return Err(Error::Validation(format!(
                        "initial mosquito amplitude {amp_v} must lie in [0, N2 = {n2}]"
                    )));
                }
            }
            InitialData::Sampled { u, v } => {
                if u.len() < 3 || u.len() != v.len() {
                    return Err(Error::Validation(
                        "sampled initial data needs two equal-length arrays of >= 3 points".into(),
                    ));
                }
                for (name, arr, cap) in [("U0", u, n1), ("V0", v, n2)] {
                    if arr[0] != 0.0 || arr[arr.len() - 1] != 0.0 {
                        return Err(Error::Validation(format!(
                            "{name} must vanish at both ends of [-h0, h0]"
                        )));
                    }
                    if let Some(bad) = arr.iter().find(|&&s| !(0.0..=cap).contains(&s)) {
                        return Err(Error::Validation(format!(
                            "{name} value {bad} outside [0, {cap}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Samples `(U0, V0)` at fixed coordinates `y` (so `x = h0 y`).
    pub fn sample(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let last = y.len().saturating_sub(1);
        let pin = |j: usize, val: f64| if j == 0 || j == last { 0.0 } else { val };
        match self {
            InitialData::CosineBump { amp_u, amp_v } => y
                .iter()
                .enumerate()
                .map(|(j, &yj)| {
                    let c = (0.5 * PI * yj).cos();
                    (pin(j, amp_u * c), pin(j, amp_v * c))
                })
                .unzip(),
            InitialData::Sampled { u, v } => y
                .iter()
                .enumerate()
                .map(|(j, &yj)| (pin(j, interp(u, yj)), pin(j, interp(v, yj))))
                .unzip(),
        }
    }

    /// Pointwise scaling with capping at the capacities, used to build
    /// ordered pairs of initial data.
    pub fn scaled_capped(&self, k: f64, spec: &ModelSpec) -> Self {
        match self {
            InitialData::CosineBump { amp_u, amp_v } => InitialData::CosineBump {
                amp_u: (amp_u * k).min(spec.bird_capacity),
                amp_v: (amp_v * k).min(spec.mosquito_capacity),
            },
            InitialData::Sampled { u, v } => InitialData::Sampled {
                u: u.iter().map(|s| (s * k).min(spec.bird_capacity)).collect(),
                v: v.iter().map(|s| (s * k).min(spec.mosquito_capacity)).collect(),
            },
        }
    }
}

/// Linear interpolation of equally spaced samples over `[-1, 1]`.
fn interp(samples: &[f64], y: f64) -> f64 {
    let n = samples.len() - 1;
    let s = ((y + 1.0) * 0.5 * n as f64).clamp(0.0, n as f64);
    let i = (s.floor() as usize).min(n - 1);
    let w = s - i as f64;
    samples[i] * (1.0 - w) + samples[i + 1] * w
}
