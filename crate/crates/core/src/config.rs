//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [model]
//! mu = 0.1
//! h0 = 2.0
//! alpha1.harmonics = cos:0.56:0.5:0
//! [solver]
//! output_times = 0, 100, 200, 300
//! ```
//!
//! Every key has a default, unknown keys are errors, and
//! `RunConfig::parse(&c.render()) == Ok(c)`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::coefficients::{CoefficientField, SpatialProfile, TemporalHarmonic, TrigKind};
use crate::error::{Error, Result};
use crate::lyapunov::EstimatorConfig;
use crate::model::{default_paper_spec, InitialData, ModelSpec};
use crate::solver::{BoundMode, SolverConfig};
use crate::thresholds::{ClassifyConfig, DEFAULT_SHIFTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitProfile {
    Cosine,
    /// Samples read from `init.file`: one `U, V` pair per line.
    Sampled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitSection {
    pub profile: InitProfile,
    pub amp_u: f64,
    pub amp_v: f64,
    pub file: Option<PathBuf>,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            profile: InitProfile::Cosine,
            amp_u: 0.1,
            amp_v: 2.0,
            file: None,
        }
    }
}

impl InitSection {
    /// Builds the initial data, reading the sample file if there is one.
    /// Relative file paths resolve against `base_dir`.
    pub fn initial_data(&self, base_dir: Option<&Path>) -> Result<InitialData> {
        match self.profile {
            InitProfile::Cosine => Ok(InitialData::CosineBump {
                amp_u: self.amp_u,
                amp_v: self.amp_v,
            }),
            InitProfile::Sampled => {
                let file = self
                    .file
                    .as_ref()
                    .ok_or_else(|| Error::Validation("init.profile = sampled needs init.file".into()))?;
                let path = match base_dir {
                    Some(d) if file.is_relative() => d.join(file),
                    _ => file.clone(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                parse_samples(&text)
            }
        }
    }
}

fn parse_samples(text: &str) -> Result<InitialData> {
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() || line.eq_ignore_ascii_case("u,v") {
            continue;
        }
        let pair = parse_f64_list(line).map_err(|message| Error::Parse { line: i + 1, message })?;
        if pair.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected `U, V`, got {} values", pair.len()),
            });
        }
        u.push(pair[0]);
        v.push(pair[1]);
    }
    Ok(InitialData::Sampled { u, v })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSection {
    pub estimator: EstimatorConfig,
    /// Spatial shifts sampled for the worst-case exponent.
    pub shifts: Vec<f64>,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            shifts: DEFAULT_SHIFTS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSection {
    /// Output directory; falls back to `WNV_OUT`, then the current directory.
    pub out: Option<PathBuf>,
    /// Carried for reproducibility records; no command samples randomly.
    pub seed: u64,
    /// Skip the `L*` search and use this value.
    pub l_star: Option<f64>,
    pub l_bracket: (f64, f64),
    pub mu_bracket: (f64, f64),
    pub h0_bracket: (f64, f64),
    /// Half-widths for `sweep-lambda`.
    pub l_list: Vec<f64>,
    /// Times for the `lambda(t)` series.
    pub lambda_times: Vec<f64>,
    pub mu_list: Vec<f64>,
    pub classify: ClassifyConfig,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            out: None,
            seed: 0,
            l_star: None,
            l_bracket: (0.5, 2.0),
            mu_bracket: (0.1, 2.0),
            h0_bracket: (0.6, 1.0),
            l_list: (0..10).map(|k| 0.5 + 0.25 * k as f64).collect(),
            lambda_times: vec![0.0, 100.0, 200.0, 300.0],
            mu_list: vec![0.1, 0.2, 0.4],
            classify: ClassifyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub init: InitSection,
    pub solver: SolverConfig,
    pub lyapunov: LyapunovSection,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: default_paper_spec(),
            init: InitSection::default(),
            solver: SolverConfig::default(),
            lyapunov: LyapunovSection::default(),
            run: RunSection::default(),
        }
    }
}

const FIELD_NAMES: [&str; 4] = ["alpha1", "alpha2", "gamma", "d"];

/// Coefficient field parts collected before the positivity check.
#[derive(Clone)]
struct FieldParts {
    base: f64,
    harmonics: Vec<TemporalHarmonic>,
    spatial_amp: f64,
    spatial: SpatialProfile,
    floor: f64,
    line: usize,
}

impl FieldParts {
    fn of(f: &CoefficientField) -> Self {
        Self {
            base: f.base(),
            harmonics: f.harmonics().to_vec(),
            spatial_amp: f.spatial_amp(),
            spatial: f.spatial(),
            floor: f.floor(),
            line: 0,
        }
    }

    fn build(self, name: &str) -> Result<CoefficientField> {
        CoefficientField::new(self.base, self.harmonics, self.spatial_amp, self.spatial, self.floor)
            .map_err(|e| Error::Validation(format!("model.{name}: {e}")))
    }
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

fn parse_f64_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_f64).collect()
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    match parse_f64_list(s)?.as_slice() {
        &[a, b] => Ok((a, b)),
        other => Err(format!("expected two comma-separated numbers, got {}", other.len())),
    }
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|_| format!("`{}` is not a non-negative integer", s.trim()))
}

/// `kind:amplitude:frequency[:phase]`, e.g. `cos:0.56:0.5`.
fn parse_harmonic(s: &str) -> std::result::Result<TemporalHarmonic, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(format!("harmonic `{}` must be kind:amplitude:frequency[:phase]", s.trim()));
    }
    let kind = TrigKind::from_name(parts[0]).ok_or_else(|| format!("unknown harmonic kind `{}`", parts[0]))?;
    Ok(TemporalHarmonic {
        kind,
        amplitude: parse_f64(parts[1])?,
        frequency: parse_f64(parts[2])?,
        phase: if parts.len() == 4 { parse_f64(parts[3])? } else { 0.0 },
    })
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Parses and validates. Syntax problems and unknown keys give
    /// [`Error::Parse`]; violated invariants give [`Error::Validation`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut fields: Vec<FieldParts> = [
            &cfg.model.alpha1,
            &cfg.model.alpha2,
            &cfg.model.recovery,
            &cfg.model.mosquito_death,
        ]
        .into_iter()
        .map(FieldParts::of)
        .collect();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let perr = |message: String| Error::Parse { line: line_no, message };
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| perr(format!("unterminated section header `{line}`")))?
                    .trim();
                if !["model", "init", "solver", "lyapunov", "run"].contains(&name) {
                    return Err(perr(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section
                .as_deref()
                .ok_or_else(|| perr(format!("key `{key}` appears before any [section]")))?;
            cfg.set(sec, key, value, &mut fields, line_no).map_err(perr)?;
        }
        let mut built = fields.into_iter().zip(FIELD_NAMES).map(|(p, name)| {
            let line = p.line;
            p.build(name).map_err(|e| match e {
                Error::Validation(m) if line > 0 => Error::Validation(format!("{m} (last set on line {line})")),
                other => other,
            })
        });
        cfg.model.alpha1 = built.next().unwrap()?;
        cfg.model.alpha2 = built.next().unwrap()?;
        cfg.model.recovery = built.next().unwrap()?;
        cfg.model.mosquito_death = built.next().unwrap()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.solver.validate()?;
        self.lyapunov.estimator.validate()?;
        if self.init.profile == InitProfile::Cosine {
            InitialData::CosineBump {
                amp_u: self.init.amp_u,
                amp_v: self.init.amp_v,
            }
            .validate(&self.model)?;
        }
        for (name, (lo, hi)) in [
            ("L_bracket", self.run.l_bracket),
            ("mu_bracket", self.run.mu_bracket),
            ("h0_bracket", self.run.h0_bracket),
        ] {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::Validation(format!("{name} must satisfy 0 < lo < hi, got ({lo}, {hi})")));
            }
        }
        if self.run.l_list.iter().any(|&l| l <= 0.0) {
            return Err(Error::Validation("L_list entries must be positive".into()));
        }
        if self.run.l_star.is_some_and(|l| l <= 0.0) {
            return Err(Error::Validation("l_star must be positive".into()));
        }
        if self.lyapunov.shifts.is_empty() {
            return Err(Error::Validation("lyapunov.shifts must not be empty".into()));
        }
        let c = &self.run.classify;
        if !(c.extinction_eps > 0.0 && c.width_slope_eps > 0.0 && c.width_margin >= 0.0) {
            return Err(Error::Validation("classification thresholds must be positive".into()));
        }
        if !(c.window_fraction > 0.0 && c.window_fraction <= 1.0) {
            return Err(Error::Validation("window must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn set(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        fields: &mut [FieldParts],
        line: usize,
    ) -> std::result::Result<(), String> {
        let f = parse_f64;
        match section {
            "model" => {
                if let Some((field, part)) = key.split_once('.') {
                    let idx = FIELD_NAMES
                        .iter()
                        .position(|&n| n == field)
                        .ok_or_else(|| format!("unknown key `{key}` in [model]"))?;
                    let p = &mut fields[idx];
                    p.line = line;
                    match part {
                        "base" => p.base = f(value)?,
                        "spatial_amp" => p.spatial_amp = f(value)?,
                        "floor" => p.floor = f(value)?,
                        "spatial" => {
                            p.spatial = SpatialProfile::from_name(value)
                                .ok_or_else(|| format!("unknown spatial profile `{value}`"))?
                        }
                        "harmonics" => {
                            p.harmonics = if value.is_empty() {
                                Vec::new()
                            } else {
                                value.split(',').map(parse_harmonic).collect::<std::result::Result<_, _>>()?
                            }
                        }
                        _ => return Err(format!("unknown key `{key}` in [model]")),
                    }
                    return Ok(());
                }
                let m = &mut self.model;
                match key {
                    "D1" => m.bird_diffusivity = f(value)?,
                    "D2" => m.mosquito_diffusivity = f(value)?,
                    "N1" => m.bird_capacity = f(value)?,
                    "N2" => m.mosquito_capacity = f(value)?,
                    "beta" => m.biting_rate = f(value)?,
                    "mu" => m.mu = f(value)?,
                    "h0" => m.h0 = f(value)?,
                    _ => return Err(format!("unknown key `{key}` in [model]")),
                }
            }
            "init" => {
                let s = &mut self.init;
                match key {
                    "profile" => {
                        s.profile = match value {
                            "cosine" => InitProfile::Cosine,
                            "sampled" => InitProfile::Sampled,
                            _ => return Err(format!("init.profile must be cosine or sampled, got `{value}`")),
                        }
                    }
                    "A_U" => s.amp_u = f(value)?,
                    "A_V" => s.amp_v = f(value)?,
                    "file" => s.file = (!value.is_empty()).then(|| PathBuf::from(value)),
                    _ => return Err(format!("unknown key `{key}` in [init]")),
                }
            }
            "solver" => {
                let s = &mut self.solver;
                match key {
                    "J" => s.cells = parse_usize(value)?,
                    "dt0" => s.dt0 = f(value)?,
                    "dt_min" => s.dt_min = f(value)?,
                    "dt_max" => s.dt_max = f(value)?,
                    "t_end" => s.t_end = f(value)?,
                    "newton_tol" => s.newton_tol = f(value)?,
                    "max_newton" => s.max_newton = parse_usize(value)?,
                    "output_times" => s.output_times = parse_f64_list(value)?,
                    "bound_mode" => {
                        s.bound_mode = BoundMode::from_name(value)
                            .ok_or_else(|| format!("bound_mode must be clip_tiny or reject_step, got `{value}`"))?
                    }
                    "probes" => s.probes = parse_f64_list(value)?,
                    "raster_rows" => s.raster_rows = parse_usize(value)?,
                    _ => return Err(format!("unknown key `{key}` in [solver]")),
                }
            }
            "lyapunov" => {
                let e = &mut self.lyapunov.estimator;
                match key {
                    "J" => e.cells = parse_usize(value)?,
                    "dt" => e.dt = f(value)?,
                    "horizon" => e.horizon = f(value)?,
                    "renorm_low" => e.renorm_low = f(value)?,
                    "renorm_high" => e.renorm_high = f(value)?,
                    "tol" => e.tol = f(value)?,
                    "shifts" => self.lyapunov.shifts = parse_f64_list(value)?,
                    _ => return Err(format!("unknown key `{key}` in [lyapunov]")),
                }
            }
            "run" => {
                let r = &mut self.run;
                match key {
                    "out" => r.out = (!value.is_empty()).then(|| PathBuf::from(value)),
                    "seed" => r.seed = value.parse().map_err(|_| format!("`{value}` is not a valid seed"))?,
                    "l_star" => r.l_star = if value.is_empty() { None } else { Some(f(value)?) },
                    "L_bracket" => r.l_bracket = parse_pair(value)?,
                    "mu_bracket" => r.mu_bracket = parse_pair(value)?,
                    "h0_bracket" => r.h0_bracket = parse_pair(value)?,
                    "L_list" => r.l_list = parse_f64_list(value)?,
                    "lambda_times" => r.lambda_times = parse_f64_list(value)?,
                    "mu_list" => r.mu_list = parse_f64_list(value)?,
                    "extinction_eps" => r.classify.extinction_eps = f(value)?,
                    "width_slope_eps" => r.classify.width_slope_eps = f(value)?,
                    "window" => r.classify.window_fraction = f(value)?,
                    "width_margin" => r.classify.width_margin = f(value)?,
                    _ => return Err(format!("unknown key `{key}` in [run]")),
                }
            }
            _ => unreachable!("section names are checked on entry"),
        }
        Ok(())
    }

    /// Renders every key, so the output doubles as a fully specified config.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        let _ = writeln!(s, "[model]");
        for (k, v) in [
            ("D1", m.bird_diffusivity),
            ("D2", m.mosquito_diffusivity),
            ("N1", m.bird_capacity),
            ("N2", m.mosquito_capacity),
            ("beta", m.biting_rate),
            ("mu", m.mu),
            ("h0", m.h0),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        for (name, field) in FIELD_NAMES
            .iter()
            .zip([&m.alpha1, &m.alpha2, &m.recovery, &m.mosquito_death])
        {
            let harmonics = field
                .harmonics()
                .iter()
                .map(|h| format!("{}:{:?}:{:?}:{:?}", h.kind.name(), h.amplitude, h.frequency, h.phase))
                .collect::<Vec<_>>()
                .join(", ");
            let _ = writeln!(s, "{name}.base = {:?}", field.base());
            let _ = writeln!(s, "{name}.harmonics = {harmonics}");
            let _ = writeln!(s, "{name}.spatial_amp = {:?}", field.spatial_amp());
            let _ = writeln!(s, "{name}.spatial = {}", field.spatial().name());
            let _ = writeln!(s, "{name}.floor = {:?}", field.floor());
        }

        let i = &self.init;
        let _ = writeln!(s, "\n[init]");
        let profile = match i.profile {
            InitProfile::Cosine => "cosine",
            InitProfile::Sampled => "sampled",
        };
        let _ = writeln!(s, "profile = {profile}");
        let _ = writeln!(s, "A_U = {:?}", i.amp_u);
        let _ = writeln!(s, "A_V = {:?}", i.amp_v);
        if let Some(file) = &i.file {
            let _ = writeln!(s, "file = {}", file.display());
        }

        let c = &self.solver;
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "J = {}", c.cells);
        let _ = writeln!(s, "dt0 = {:?}", c.dt0);
        let _ = writeln!(s, "dt_min = {:?}", c.dt_min);
        let _ = writeln!(s, "dt_max = {:?}", c.dt_max);
        let _ = writeln!(s, "t_end = {:?}", c.t_end);
        let _ = writeln!(s, "newton_tol = {:?}", c.newton_tol);
        let _ = writeln!(s, "max_newton = {}", c.max_newton);
        let _ = writeln!(s, "output_times = {}", fmt_list(&c.output_times));
        let _ = writeln!(s, "bound_mode = {}", c.bound_mode.name());
        let _ = writeln!(s, "probes = {}", fmt_list(&c.probes));
        let _ = writeln!(s, "raster_rows = {}", c.raster_rows);

        let e = &self.lyapunov.estimator;
        let _ = writeln!(s, "\n[lyapunov]");
        let _ = writeln!(s, "J = {}", e.cells);
        let _ = writeln!(s, "dt = {:?}", e.dt);
        let _ = writeln!(s, "horizon = {:?}", e.horizon);
        let _ = writeln!(s, "renorm_low = {:?}", e.renorm_low);
        let _ = writeln!(s, "renorm_high = {:?}", e.renorm_high);
        let _ = writeln!(s, "tol = {:?}", e.tol);
        let _ = writeln!(s, "shifts = {}", fmt_list(&self.lyapunov.shifts));

        let r = &self.run;
        let _ = writeln!(s, "\n[run]");
        if let Some(out) = &r.out {
            let _ = writeln!(s, "out = {}", out.display());
        }
        let _ = writeln!(s, "seed = {}", r.seed);
        if let Some(l) = r.l_star {
            let _ = writeln!(s, "l_star = {l:?}");
        }
        let _ = writeln!(s, "L_bracket = {:?}, {:?}", r.l_bracket.0, r.l_bracket.1);
        let _ = writeln!(s, "mu_bracket = {:?}, {:?}", r.mu_bracket.0, r.mu_bracket.1);
        let _ = writeln!(s, "h0_bracket = {:?}, {:?}", r.h0_bracket.0, r.h0_bracket.1);
        let _ = writeln!(s, "L_list = {}", fmt_list(&r.l_list));
        let _ = writeln!(s, "lambda_times = {}", fmt_list(&r.lambda_times));
        let _ = writeln!(s, "mu_list = {}", fmt_list(&r.mu_list));
        let _ = writeln!(s, "extinction_eps = {:?}", r.classify.extinction_eps);
        let _ = writeln!(s, "width_slope_eps = {:?}", r.classify.width_slope_eps);
        let _ = writeln!(s, "window = {:?}", r.classify.window_fraction);
        let _ = writeln!(s, "width_margin = {:?}", r.classify.width_margin);
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
