//! Almost-periodic, spatially heterogeneous coefficient fields.
//!
//! Every field has the form
//!
//! ```text
//! c(x, t) = base * prod_i (1 + a_i * trig_i(w_i t + phi_i)) + spatial_amp * profile(x)
//! ```
//!
//! which covers the transmission, recovery and death rates used by the model.
//! Time translates (hull elements) are exact phase shifts of the harmonics.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Sampling box used when validating positivity at construction time.
const VALIDATION_X_HALF_WIDTH: f64 = 50.0;
const VALIDATION_SAMPLES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrigKind {
    Cosine,
    Sine,
}

impl TrigKind {
    fn apply(self, theta: f64) -> f64 {
        match self {
            TrigKind::Cosine => theta.cos(),
            TrigKind::Sine => theta.sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrigKind::Cosine => "cos",
            TrigKind::Sine => "sin",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "cos" => Some(TrigKind::Cosine),
            "sin" => Some(TrigKind::Sine),
            _ => None,
        }
    }
}

/// Relative temporal modulation `1 + amplitude * trig(frequency * t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalHarmonic {
    pub amplitude: f64,
    pub frequency: f64,
    pub kind: TrigKind,
    pub phase: f64,
}

impl TemporalHarmonic {
    pub fn cosine(amplitude: f64, frequency: f64) -> Self {
        Self {
            amplitude,
            frequency,
            kind: TrigKind::Cosine,
            phase: 0.0,
        }
    }

    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Self {
            amplitude,
            frequency,
            kind: TrigKind::Sine,
            phase: 0.0,
        }
    }

    #[inline]
    pub fn factor(&self, t: f64) -> f64 {
        1.0 + self.amplitude * self.kind.apply(self.frequency * t + self.phase)
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.frequency
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude.abs() < 1.0) {
            return Err(Error::Validation(format!(
                "harmonic amplitude must satisfy |a| < 1, got {}",
                self.amplitude
            )));
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::Validation(format!(
                "harmonic frequency must be positive, got {}",
                self.frequency
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::Validation("harmonic phase must be finite".into()));
        }
        Ok(())
    }
}

/// Bounded spatial heterogeneity profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpatialProfile {
    ConstantOne,
    /// `(2 + x) / (1 + x^2) * cos x`
    Ratio2Cos,
    /// `(1 + x) / (1 + x^2) * cos x`
    Ratio1Cos,
    /// `(2 + x) / (1 + x^2) * sin x`
    Ratio2Sin,
    /// `(1 + x) / (1 + x^2) * sin x`
    Ratio1Sin,
}

impl SpatialProfile {
    pub const ALL: [SpatialProfile; 5] = [
        SpatialProfile::ConstantOne,
        SpatialProfile::Ratio2Cos,
        SpatialProfile::Ratio1Cos,
        SpatialProfile::Ratio2Sin,
        SpatialProfile::Ratio1Sin,
    ];

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        let r = 1.0 + x * x;
        match self {
            SpatialProfile::ConstantOne => 1.0,
            SpatialProfile::Ratio2Cos => (2.0 + x) / r * x.cos(),
            SpatialProfile::Ratio1Cos => (1.0 + x) / r * x.cos(),
            SpatialProfile::Ratio2Sin => (2.0 + x) / r * x.sin(),
            SpatialProfile::Ratio1Sin => (1.0 + x) / r * x.sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpatialProfile::ConstantOne => "one",
            SpatialProfile::Ratio2Cos => "ratio2_cos",
            SpatialProfile::Ratio1Cos => "ratio1_cos",
            SpatialProfile::Ratio2Sin => "ratio2_sin",
            SpatialProfile::Ratio1Sin => "ratio1_sin",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// A positive scalar coefficient `c(x, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    base: f64,
    harmonics: Vec<TemporalHarmonic>,
    spatial_amp: f64,
    spatial: SpatialProfile,
    floor: f64,
}

impl CoefficientField {
    /// Builds a field and checks positivity (`>= floor`) on a dense `(x, t)` sample.
    pub fn new(
        base: f64,
        harmonics: Vec<TemporalHarmonic>,
        spatial_amp: f64,
        spatial: SpatialProfile,
        floor: f64,
    ) -> Result<Self> {
        if !(base.is_finite() && base > 0.0) {
            return Err(Error::Validation(format!(
                "field base must be positive, got {base}"
            )));
        }
        if !spatial_amp.is_finite() {
            return Err(Error::Validation("spatial amplitude must be finite".into()));
        }
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::Validation(format!(
                "field floor must be positive, got {floor}"
            )));
        }
        for h in &harmonics {
            h.validate()?;
        }
        let field = Self {
            base,
            harmonics,
            spatial_amp,
            spatial,
            floor,
        };
        let min = field.sampled_min(VALIDATION_SAMPLES);
        if min < floor {
            return Err(Error::Validation(format!(
                "field drops to {min} below its floor {floor} on the validation sample"
            )));
        }
        Ok(field)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(
            value,
            Vec::new(),
            0.0,
            SpatialProfile::ConstantOne,
            value.clamp(f64::MIN_POSITIVE, 1e-12),
        )
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn harmonics(&self) -> &[TemporalHarmonic] {
        &self.harmonics
    }

    pub fn spatial_amp(&self) -> f64 {
        self.spatial_amp
    }

    pub fn spatial(&self) -> SpatialProfile {
        self.spatial
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    #[inline]
    pub fn temporal_factor(&self, t: f64) -> f64 {
        self.harmonics.iter().map(|h| h.factor(t)).product()
    }

    /// Raw value, clamped from below at the floor.
    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let v = self.base * self.temporal_factor(t) + self.spatial_amp * self.spatial.eval(x);
        v.max(self.floor)
    }

    /// The time translate `(x, t) -> c(x, t + tau)`.
    pub fn shifted(&self, tau: f64) -> Self {
        let mut out = self.clone();
        for h in &mut out.harmonics {
            h.phase = (h.phase + h.frequency * tau).rem_euclid(2.0 * PI);
        }
        out
    }

    /// Multiplies the whole field by a positive constant.
    pub fn scaled(&self, k: f64) -> Self {
        assert!(k > 0.0 && k.is_finite(), "scale factor must be positive");
        Self {
            base: self.base * k,
            harmonics: self.harmonics.clone(),
            spatial_amp: self.spatial_amp * k,
            spatial: self.spatial,
            floor: self.floor * k,
        }
    }

    /// Same temporal structure with the spatial term removed.
    pub fn without_spatial(&self) -> Self {
        Self {
            spatial_amp: 0.0,
            spatial: SpatialProfile::ConstantOne,
            ..self.clone()
        }
    }

    /// Same spatial term with all temporal harmonics removed.
    pub fn without_harmonics(&self) -> Self {
        Self {
            harmonics: Vec::new(),
            ..self.clone()
        }
    }

    /// Longest harmonic period, or 1 for a time-independent field.
    pub fn longest_period(&self) -> f64 {
        self.harmonics
            .iter()
            .map(TemporalHarmonic::period)
            .fold(1.0, f64::max)
    }

    /// Minimum of the unclamped expression over an `n x n` grid of
    /// `x in [-50, 50]`, `t in [0, 4 * longest period]`.
    pub fn sampled_min(&self, n: usize) -> f64 {
        let n = n.max(2);
        let t_span = 4.0 * self.longest_period();
        let mut min = f64::INFINITY;
        for i in 0..n {
            let x = -VALIDATION_X_HALF_WIDTH + 2.0 * VALIDATION_X_HALF_WIDTH * i as f64 / (n - 1) as f64;
            let s = self.spatial_amp * self.spatial.eval(x);
            for k in 0..n {
                let t = t_span * k as f64 / (n - 1) as f64;
                min = min.min(self.base * self.temporal_factor(t) + s);
            }
        }
        min
    }

    /// Rigorous upper bound on `sup_{x,t} |c(x, t + tau) - c(x, t)|`.
    pub fn translation_defect_bound(&self, tau: f64) -> f64 {
        let amps: Vec<f64> = self.harmonics.iter().map(|h| h.amplitude.abs()).collect();
        let mut total = 0.0;
        for (i, h) in self.harmonics.iter().enumerate() {
            let others: f64 = amps
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, a)| 1.0 + a)
                .product();
            let delta = h.frequency * tau;
            // |trig(s + delta) - trig(s)| <= 2 |sin(delta / 2)|
            total += self.base * amps[i] * others * 2.0 * (0.5 * delta).sin().abs();
        }
        total
    }

    /// Sampled `max |c(x, t + tau) - c(x, t)|` over `x in [-10, 10]`, `t in [0, t_span]`.
    pub fn sampled_translation_defect(&self, tau: f64, t_span: f64, n: usize) -> f64 {
        let n = n.max(2);
        let mut sup: f64 = 0.0;
        for i in 0..n {
            let x = -10.0 + 20.0 * i as f64 / (n - 1) as f64;
            for k in 0..n {
                let t = t_span * k as f64 / (n - 1) as f64;
                sup = sup.max((self.eval(x, t + tau) - self.eval(x, t)).abs());
            }
        }
        sup
    }
}

/// An `eps`-almost period shared by a set of fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranslationWitness {
    pub tau: f64,
    /// Upper bound on the sup difference under translation by `tau`.
    pub defect_bound: f64,
}

/// Finds the smallest `tau in [tau_min, tau_max]` that is a common
/// `eps`-translation number of all `fields`, using the rigorous defect bound.
///
/// Coarse scan at step 0.01 followed by local refinement around candidates.
pub fn find_translation_number(
    fields: &[&CoefficientField],
    eps: f64,
    tau_min: f64,
    tau_max: f64,
) -> Option<TranslationWitness> {
    let defect = |tau: f64| {
        fields
            .iter()
            .map(|f| f.translation_defect_bound(tau))
            .fold(0.0, f64::max)
    };
    // The bound is Lipschitz in tau with this constant.
    let slope: f64 = fields
        .iter()
        .map(|f| {
            let amps: f64 = f.harmonics.iter().map(|h| 1.0 + h.amplitude.abs()).product();
            f.harmonics
                .iter()
                .map(|h| f.base * h.amplitude.abs() * h.frequency * amps)
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let step = 0.01;
    let steps = ((tau_max - tau_min) / step).ceil() as usize;
    for k in 0..=steps {
        let tau = tau_min + k as f64 * step;
        if defect(tau) - slope * step > eps {
            continue;
        }
        let fine = 400;
        let (best_tau, best) = (0..=fine)
            .map(|i| {
                let s = (tau - step + 2.0 * step * i as f64 / fine as f64).clamp(tau_min, tau_max);
                (s, defect(s))
            })
            .fold((tau, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        if best < eps {
            return Some(TranslationWitness {
                tau: best_tau,
                defect_bound: best,
            });
        }
    }
    None
}

/// A field whose spatial part has been evaluated once on a fixed grid, so
/// that refreshing it at a new time costs one product of harmonics.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    base: f64,
    harmonics: Vec<TemporalHarmonic>,
    spatial: Vec<f64>,
    floor: f64,
    scale: f64,
}

impl GridField {
    fn constant(value: f64, len: usize) -> Self {
        Self {
            base: value,
            harmonics: Vec::new(),
            spatial: vec![0.0; len],
            floor: f64::NEG_INFINITY,
            scale: 1.0,
        }
    }

    fn from_field(field: &CoefficientField, xs: &[f64], scale: f64) -> Self {
        Self {
            base: field.base,
            harmonics: field.harmonics.clone(),
            spatial: xs
                .iter()
                .map(|&x| field.spatial_amp * field.spatial.eval(x))
                .collect(),
            floor: field.floor,
            scale,
        }
    }

    /// Writes `scale * c(x_i, t)` for every grid point.
    pub fn fill(&self, t: f64, out: &mut [f64]) {
        let temporal = self.base * self.harmonics.iter().map(|h| h.factor(t)).product::<f64>();
        for (o, s) in out.iter_mut().zip(&self.spatial) {
            *o = self.scale * (temporal + s).max(self.floor);
        }
    }
}

/// Row-major entries `[a00, a01, a10, a11]` of a matrix field on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMatrix {
    pub entries: [GridField; 4],
}

impl GridMatrix {
    pub fn len(&self) -> usize {
        self.entries[0].spatial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill(&self, t: f64, out: &mut [[f64; 4]]) {
        let mut col = vec![0.0; out.len()];
        for (k, e) in self.entries.iter().enumerate() {
            e.fill(t, &mut col);
            for (o, v) in out.iter_mut().zip(&col) {
                o[k] = *v;
            }
        }
    }
}

/// Entry-wise evaluation of a 2x2 matrix-valued coefficient `A(x, t)`.
pub trait MatrixField: Sync {
    fn eval_matrix(&self, x: f64, t: f64) -> [[f64; 2]; 2];

    /// Pre-evaluates the spatial dependence on `xs`.
    fn on_grid(&self, xs: &[f64]) -> GridMatrix;
}

/// Time- and space-independent cooperative matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantMatrix(pub [[f64; 2]; 2]);

impl ConstantMatrix {
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self> {
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("matrix entries must be finite".into()));
        }
        if entries[0][1] < 0.0 || entries[1][0] < 0.0 {
            return Err(Error::Validation(
                "cooperative matrix needs nonnegative off-diagonal entries".into(),
            ));
        }
        Ok(Self(entries))
    }
}

impl MatrixField for ConstantMatrix {
    fn eval_matrix(&self, _x: f64, _t: f64) -> [[f64; 2]; 2] {
        self.0
    }

    fn on_grid(&self, xs: &[f64]) -> GridMatrix {
        let [[a, b], [c, d]] = self.0;
        GridMatrix {
            entries: [a, b, c, d].map(|v| GridField::constant(v, xs.len())),
        }
    }
}

/// `A(x, t) = [[-d1, a1 N1], [a2 N2, -d2]]`, the linearization of the
/// reaction terms at the disease-free state, optionally shifted in `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizationMatrix {
    pub a1: CoefficientField,
    pub a2: CoefficientField,
    pub d1: CoefficientField,
    pub d2: CoefficientField,
    pub n1: f64,
    pub n2: f64,
    pub x_shift: f64,
}

impl LinearizationMatrix {
    pub fn new(
        a1: CoefficientField,
        a2: CoefficientField,
        d1: CoefficientField,
        d2: CoefficientField,
        n1: f64,
        n2: f64,
    ) -> Result<Self> {
        if !(n1 > 0.0 && n2 > 0.0 && n1.is_finite() && n2.is_finite()) {
            return Err(Error::Validation("capacities must be positive".into()));
        }
        Ok(Self {
            a1,
            a2,
            d1,
            d2,
            n1,
            n2,
            x_shift: 0.0,
        })
    }

    #[inline]
    pub fn eval_a(&self, x: f64, t: f64) -> [[f64; 2]; 2] {
        let x = x + self.x_shift;
        [
            [-self.d1.eval(x, t), self.a1.eval(x, t) * self.n1],
            [self.a2.eval(x, t) * self.n2, -self.d2.eval(x, t)],
        ]
    }

    /// `A(. + dx, .)`; shifts compose additively.
    pub fn shifted_x(&self, dx: f64) -> Self {
        Self {
            x_shift: self.x_shift + dx,
            ..self.clone()
        }
    }

    /// `A(., . + tau)`.
    pub fn shifted_t(&self, tau: f64) -> Self {
        Self {
            a1: self.a1.shifted(tau),
            a2: self.a2.shifted(tau),
            d1: self.d1.shifted(tau),
            d2: self.d2.shifted(tau),
            ..self.clone()
        }
    }

    /// The matrix with all spatial heterogeneity removed.
    pub fn without_spatial(&self) -> Self {
        Self {
            a1: self.a1.without_spatial(),
            a2: self.a2.without_spatial(),
            d1: self.d1.without_spatial(),
            d2: self.d2.without_spatial(),
            ..self.clone()
        }
    }

    pub fn without_harmonics(&self) -> Self {
        Self {
            a1: self.a1.without_harmonics(),
            a2: self.a2.without_harmonics(),
            d1: self.d1.without_harmonics(),
            d2: self.d2.without_harmonics(),
            ..self.clone()
        }
    }

    pub fn longest_period(&self) -> f64 {
        [&self.a1, &self.a2, &self.d1, &self.d2]
            .iter()
            .map(|f| f.longest_period())
            .fold(1.0, f64::max)
    }
}

impl MatrixField for LinearizationMatrix {
    fn eval_matrix(&self, x: f64, t: f64) -> [[f64; 2]; 2] {
        self.eval_a(x, t)
    }

    fn on_grid(&self, xs: &[f64]) -> GridMatrix {
        let shifted: Vec<f64> = xs.iter().map(|x| x + self.x_shift).collect();
        GridMatrix {
            entries: [
                GridField::from_field(&self.d1, &shifted, -1.0),
                GridField::from_field(&self.a1, &shifted, self.n1),
                GridField::from_field(&self.a2, &shifted, self.n2),
                GridField::from_field(&self.d2, &shifted, -1.0),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_fields;

    #[test]
    fn d2_at_origin() {
        let f = reference_fields();
        assert!((f.death.eval(0.0, 0.0) - 0.029).abs() < 1e-15);
    }

    #[test]
    fn alpha1_at_origin() {
        // 0.88 * (1 + 0.56) + 0.088 * (2 / 1) * cos 0
        let hand: f64 = 0.88 * 1.56 + 0.088 * 2.0;
        assert!((hand - 1.5488).abs() < 1e-12);
        assert!((reference_fields().alpha1.eval(0.0, 0.0) - 1.5488).abs() < 1e-12);
    }

    #[test]
    fn constant_field_is_constant() {
        let c = CoefficientField::constant(0.7).unwrap();
        for &(x, t) in &[(0.0, 0.0), (-3.0, 17.0), (100.0, 1e4)] {
            assert_eq!(c.eval(x, t), 0.7);
            assert_eq!(c.shifted(123.4).eval(x, t), 0.7);
        }
    }

    #[test]
    fn shift_by_zero_and_full_period() {
        let a1 = reference_fields().alpha1;
        let s0 = a1.shifted(0.0);
        let s4pi = a1.shifted(4.0 * PI);
        for i in 0..50 {
            let x = -5.0 + 0.2 * i as f64;
            let t = 0.37 * i as f64;
            assert_eq!(s0.eval(x, t), a1.eval(x, t));
            assert!((s4pi.eval(x, t) - a1.eval(x, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_matches_translate() {
        let d1 = reference_fields().gamma;
        let s = d1.shifted(2.5);
        for i in 0..40 {
            let t = 0.9 * i as f64;
            assert!((s.eval(0.3, t) - d1.eval(0.3, t + 2.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_fields() {
        assert!(CoefficientField::new(
            0.1,
            vec![TemporalHarmonic::cosine(0.5, 1.0)],
            0.1,
            SpatialProfile::Ratio2Cos,
            1e-6
        )
        .is_err());
        assert!(CoefficientField::new(
            1.0,
            vec![TemporalHarmonic::cosine(1.2, 1.0)],
            0.0,
            SpatialProfile::ConstantOne,
            1e-6
        )
        .is_err());
        assert!(CoefficientField::new(
            1.0,
            vec![TemporalHarmonic::sine(0.2, -1.0)],
            0.0,
            SpatialProfile::ConstantOne,
            1e-6
        )
        .is_err());
        assert!(CoefficientField::constant(-1.0).is_err());
    }

    #[test]
    fn profiles_are_bounded() {
        for p in SpatialProfile::ALL {
            for i in 0..=20_000 {
                let x = -100.0 + 0.01 * i as f64;
                assert!(p.eval(x).abs() <= 3.0, "{p:?} at {x}");
            }
            assert_eq!(SpatialProfile::from_name(p.name()), Some(p));
        }
    }

    #[test]
    fn constant_linearization() {
        let one = CoefficientField::constant(1.0).unwrap();
        let m = LinearizationMatrix::new(one.clone(), one.clone(), one.clone(), one, 1.0, 1.0)
            .unwrap();
        assert_eq!(m.eval_a(0.4, 9.0), [[-1.0, 1.0], [1.0, -1.0]]);
    }

    #[test]
    fn rejects_competitive_constant_matrix() {
        assert!(ConstantMatrix::new([[-1.0, -0.1], [1.0, -1.0]]).is_err());
        assert!(ConstantMatrix::new([[-1.0, 0.0], [0.0, -1.0]]).is_ok());
    }

    #[test]
    fn grid_matrix_matches_pointwise() {
        let m = crate::model::default_paper_spec().linearization().shifted_x(0.7);
        let xs: Vec<f64> = (0..25).map(|i| -3.0 + 0.25 * i as f64).collect();
        let grid = m.on_grid(&xs);
        let mut out = vec![[0.0; 4]; xs.len()];
        for &t in &[0.0, 3.3, 101.0] {
            grid.fill(t, &mut out);
            for (x, o) in xs.iter().zip(&out) {
                let a = m.eval_a(*x, t);
                let flat = [a[0][0], a[0][1], a[1][0], a[1][1]];
                for k in 0..4 {
                    assert!((o[k] - flat[k]).abs() <= 1e-14 * flat[k].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn single_harmonic_translation_number_is_its_period() {
        let f = CoefficientField::new(
            1.0,
            vec![TemporalHarmonic::cosine(0.5, 0.25)],
            0.0,
            SpatialProfile::ConstantOne,
            1e-6,
        )
        .unwrap();
        let w = find_translation_number(&[&f], 1e-3, 1.0, 100.0).unwrap();
        assert!((w.tau - 8.0 * PI).abs() < 0.01, "tau = {}", w.tau);
    }
}
