//! Experiment configuration: parsing, preset defaults and validation.

use std::fmt;
use std::str::FromStr;

use cais_core::adaptation::{AdaptationConfig, MeanCenter, Transform};
use cais_core::diagnostics::KlDirection;
use cais_core::distributions::EXAMPLE_DIM;
use cais_core::linalg::SpdMatrix;
use cais_core::samplers::{InitScheme, RunPlan, SamplerKind};
use thiserror::Error;
use toml::{Table, Value};

/// Target-evaluation ceiling applied when a config sets no `budget`.
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

/// Half-width of the hypercube that initial means are drawn from.
pub const INIT_HALF_WIDTH: f64 = 10.0;

pub const KEYS: [&str; 15] = [
    "preset",
    "sampler",
    "transform",
    "dimension",
    "D",
    "N",
    "I",
    "n_t",
    "sigma",
    "runs",
    "seed",
    "kl_direction",
    "mean_center",
    "gamma_eps",
    "budget",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Syntax(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
}

impl ConfigError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Field { field: field.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Unimodal Gaussian target, one proposal started at the origin.
    Example1,
    /// Three-component mixture target, population started in a hypercube.
    Example2,
    /// Unimodal Gaussian target of any dimension, hypercube start.
    Custom,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Custom => "custom",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "example1" => Ok(Preset::Example1),
            "example2" => Ok(Preset::Example2),
            "custom" => Ok(Preset::Custom),
            other => Err(format!("unknown preset `{other}`; expected example1, example2 or custom")),
        }
    }
}

/// ESS threshold as written in a config: a sample count or a fraction of `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Count(usize),
    Fraction(f64),
}

impl Threshold {
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            Threshold::Count(c) => c,
            Threshold::Fraction(f) => (f * n as f64).round() as usize,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Count(c) => write!(f, "{c}"),
            Threshold::Fraction(x) => write!(f, "{x:?}"),
        }
    }
}

impl FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Ok(c) = s.parse::<usize>() {
            return Ok(Threshold::Count(c));
        }
        match s.parse::<f64>() {
            Ok(f) if f > 0.0 && f < 1.0 => Ok(Threshold::Fraction(f)),
            _ => Err(format!("`{s}` is neither a sample count nor a fraction in (0, 1)")),
        }
    }
}

pub fn parse_sampler(s: &str) -> Result<SamplerKind, String> {
    match s {
        "cais" => Ok(SamplerKind::Cais),
        "basic_ais" => Ok(SamplerKind::BasicAis),
        "npmc_style" => Ok(SamplerKind::NpmcStyle),
        other => Err(format!("unknown sampler `{other}`; expected cais, basic_ais or npmc_style")),
    }
}

pub fn parse_transform(s: &str) -> Result<Transform, String> {
    match s {
        "clip" => Ok(Transform::Clip),
        "temper" => Ok(Transform::Temper),
        other => Err(format!("unknown transform `{other}`; expected clip or temper")),
    }
}

pub fn transform_str(t: Transform) -> &'static str {
    match t {
        Transform::Clip => "clip",
        Transform::Temper => "temper",
    }
}

fn parse_kl_direction(s: &str) -> Result<KlDirection, String> {
    match s {
        "target_to_proposal" => Ok(KlDirection::TargetToProposal),
        "proposal_to_target" => Ok(KlDirection::ProposalToTarget),
        other => Err(format!("unknown direction `{other}`; expected target_to_proposal or proposal_to_target")),
    }
}

fn kl_direction_str(k: KlDirection) -> &'static str {
    match k {
        KlDirection::TargetToProposal => "target_to_proposal",
        KlDirection::ProposalToTarget => "proposal_to_target",
    }
}

fn parse_mean_center(s: &str) -> Result<MeanCenter, String> {
    match s {
        "weighted_mean" => Ok(MeanCenter::WeightedMean),
        "sampling_mean" => Ok(MeanCenter::SamplingMean),
        other => Err(format!("unknown centering `{other}`; expected weighted_mean or sampling_mean")),
    }
}

fn mean_center_str(m: MeanCenter) -> &'static str {
    match m {
        MeanCenter::WeightedMean => "weighted_mean",
        MeanCenter::SamplingMean => "sampling_mean",
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub sampler: SamplerKind,
    pub transform: Transform,
    pub dimension: usize,
    pub components: usize,
    pub samples: usize,
    pub iterations: usize,
    /// Threshold as configured; `n_t` is its resolution against `samples`.
    pub threshold: Threshold,
    pub n_t: usize,
    pub sigma: f64,
    pub runs: usize,
    pub seed: u64,
    pub kl_direction: KlDirection,
    pub mean_center: MeanCenter,
    pub gamma_eps: Option<f64>,
    pub budget: u64,
}

impl ExperimentSpec {
    /// Defaults of a preset before any config overrides.
    pub fn preset(preset: Preset) -> Self {
        let base = ExperimentSpec {
            preset,
            sampler: SamplerKind::Cais,
            transform: Transform::Temper,
            dimension: EXAMPLE_DIM,
            components: 1,
            samples: 500,
            iterations: 50,
            threshold: Threshold::Count(50),
            n_t: 50,
            sigma: 2.0,
            runs: 20,
            seed: 1,
            kl_direction: KlDirection::default(),
            mean_center: MeanCenter::default(),
            gamma_eps: None,
            budget: DEFAULT_BUDGET,
        };
        match preset {
            Preset::Example1 | Preset::Custom => base,
            Preset::Example2 => ExperimentSpec {
                components: 25,
                samples: 400,
                iterations: 40,
                threshold: Threshold::Fraction(0.1),
                n_t: 40,
                sigma: 1.0,
                runs: 25,
                ..base
            },
        }
    }

    /// Re-resolves `n_t` and checks every constraint.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        if self.preset != Preset::Custom && self.dimension != EXAMPLE_DIM {
            return Err(ConfigError::InvalidConstraint(format!(
                "preset {} has dimension {EXAMPLE_DIM}, got {}",
                self.preset.as_str(),
                self.dimension
            )));
        }
        for (name, v) in [
            ("dimension", self.dimension),
            ("D", self.components),
            ("N", self.samples),
            ("I", self.iterations),
            ("runs", self.runs),
        ] {
            if v == 0 {
                return Err(ConfigError::InvalidConstraint(format!("{name} must be at least 1")));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(ConfigError::InvalidConstraint(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Some(eps) = self.gamma_eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(ConfigError::InvalidConstraint(format!("gamma_eps must be positive, got {eps}")));
            }
        }
        self.n_t = self.threshold.resolve(self.samples);
        if self.n_t <= self.dimension || self.n_t >= self.samples {
            return Err(ConfigError::InvalidConstraint(format!(
                "d_x < n_t < N violated: d_x = {}, n_t = {}, N = {}",
                self.dimension, self.n_t, self.samples
            )));
        }
        Ok(self)
    }

    pub fn plan(&self) -> RunPlan {
        RunPlan { components: self.components, samples_per_component: self.samples, iterations: self.iterations }
    }

    /// Target evaluations across all replicates.
    pub fn evaluations(&self) -> u128 {
        self.plan().evaluations() as u128 * self.runs as u128
    }

    pub fn check_budget(&self) -> Result<(), BudgetExceeded> {
        let needed = self.evaluations();
        if needed > self.budget as u128 {
            return Err(BudgetExceeded { needed, budget: self.budget });
        }
        Ok(())
    }

    pub fn adaptation(&self) -> AdaptationConfig<f64> {
        AdaptationConfig {
            gamma_eps: self.gamma_eps,
            ..AdaptationConfig::new(self.n_t).with_transform(self.transform).with_mean_center(self.mean_center)
        }
    }

    pub fn init_scheme(&self) -> InitScheme<f64> {
        let var = self.sigma * self.sigma;
        match self.preset {
            Preset::Example1 => {
                InitScheme::Fixed { mean: vec![0.0; self.dimension], cov: SpdMatrix::scaled_identity(self.dimension, var) }
            }
            Preset::Example2 | Preset::Custom => InitScheme::UniformHypercube {
                dim: self.dimension,
                lower: -INIT_HALF_WIDTH,
                upper: INIT_HALF_WIDTH,
                sigma: self.sigma,
            },
        }
    }

    /// Short method label such as `cais-temper`.
    pub fn method(&self) -> String {
        match self.sampler {
            SamplerKind::Cais => format!("cais-{}", transform_str(self.transform)),
            other => other.as_str().to_string(),
        }
    }

    /// Canonical `key = value` text; the manifest hashes this.
    pub fn canonical(&self) -> String {
        let gamma_eps = match self.gamma_eps {
            Some(e) => format!("gamma_eps = {e:?}"),
            None => "# gamma_eps = max(1, 0.01 N)".to_string(),
        };
        let threshold = match self.threshold {
            Threshold::Count(c) => c.to_string(),
            Threshold::Fraction(f) => format!("{f:?}"),
        };
        format!(
            "preset = \"{}\"\nsampler = \"{}\"\ntransform = \"{}\"\ndimension = {}\nD = {}\nN = {}\nI = {}\n\
             n_t = {}\nsigma = {:?}\nruns = {}\nseed = {}\nkl_direction = \"{}\"\nmean_center = \"{}\"\n\
             {}\nbudget = {}\n",
            self.preset.as_str(),
            self.sampler.as_str(),
            transform_str(self.transform),
            self.dimension,
            self.components,
            self.samples,
            self.iterations,
            threshold,
            self.sigma,
            self.runs,
            self.seed,
            kl_direction_str(self.kl_direction),
            mean_center_str(self.mean_center),
            gamma_eps,
            self.budget,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("budget guard: {needed} target evaluations requested, budget is {budget}")]
pub struct BudgetExceeded {
    pub needed: u128,
    pub budget: u64,
}

/// Flattens top-level keys and one level of `[section]` tables.
fn flatten(table: Table) -> Result<Vec<(String, Value)>, ConfigError> {
    let mut out: Vec<(String, Value)> = Vec::new();
    for (key, value) in table {
        match value {
            Value::Table(inner) => {
                for (k, v) in inner {
                    if matches!(v, Value::Table(_)) {
                        return Err(ConfigError::field(&k, "nested sections are not supported"));
                    }
                    out.push((k, v));
                }
            }
            v => out.push((key, v)),
        }
    }
    let mut seen = std::collections::HashSet::new();
    for (k, _) in &out {
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::field(k, format!("unknown key; expected one of {}", KEYS.join(", "))));
        }
        if !seen.insert(k.clone()) {
            return Err(ConfigError::field(k, "given more than once"));
        }
    }
    Ok(out)
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| ConfigError::field(key, format!("expected a string, got {}", v.type_str())))
}

fn as_count(key: &str, v: &Value) -> Result<u64, ConfigError> {
    match v.as_integer() {
        Some(i) if i >= 0 => Ok(i as u64),
        Some(i) => Err(ConfigError::field(key, format!("must be non-negative, got {i}"))),
        None => Err(ConfigError::field(key, format!("expected an integer, got {}", v.type_str()))),
    }
}

fn as_real(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(ConfigError::field(key, format!("expected a number, got {}", other.type_str()))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize, ConfigError> {
    usize::try_from(as_count(key, v)?).map_err(|_| ConfigError::field(key, "value too large"))
}

/// Parses config text into a resolved spec.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string().trim().to_string()))?;
    let entries = flatten(table)?;

    let preset = match entries.iter().find(|(k, _)| k == "preset") {
        Some((k, v)) => as_str(k, v)?.parse().map_err(|m| ConfigError::field(k, m))?,
        None => Preset::Custom,
    };
    let mut spec = ExperimentSpec::preset(preset);

    for (key, v) in &entries {
        let k = key.as_str();
        let field = |m: String| ConfigError::field(k, m);
        match k {
            "preset" => {}
            "sampler" => spec.sampler = parse_sampler(as_str(k, v)?).map_err(field)?,
            "transform" => spec.transform = parse_transform(as_str(k, v)?).map_err(field)?,
            "dimension" => spec.dimension = as_usize(k, v)?,
            "D" => spec.components = as_usize(k, v)?,
            "N" => spec.samples = as_usize(k, v)?,
            "I" => spec.iterations = as_usize(k, v)?,
            "n_t" => {
                spec.threshold = match v {
                    Value::Integer(_) => Threshold::Count(as_usize(k, v)?),
                    Value::Float(f) if *f > 0.0 && *f < 1.0 => Threshold::Fraction(*f),
                    Value::Float(f) => return Err(field(format!("fraction must lie in (0, 1), got {f}"))),
                    Value::String(s) => s.parse().map_err(field)?,
                    other => return Err(field(format!("expected an integer or a fraction, got {}", other.type_str()))),
                }
            }
            "sigma" => spec.sigma = as_real(k, v)?,
            "runs" => spec.runs = as_usize(k, v)?,
            "seed" => spec.seed = as_count(k, v)?,
            "kl_direction" => spec.kl_direction = parse_kl_direction(as_str(k, v)?).map_err(field)?,
            "mean_center" => spec.mean_center = parse_mean_center(as_str(k, v)?).map_err(field)?,
            "gamma_eps" => spec.gamma_eps = Some(as_real(k, v)?),
            "budget" => spec.budget = as_count(k, v)?,
            _ => unreachable!("unknown keys are rejected by flatten"),
        }
    }
    spec.resolve()
}

/// Built-in configurations listed by `cais presets`.
pub fn builtin_presets() -> Vec<(&'static str, &'static str, String)> {
    let e1 = ExperimentSpec::preset(Preset::Example1);
    let e2 = ExperimentSpec::preset(Preset::Example2);
    vec![
        ("example1", "10-D Gaussian target, one proposal from N(0, 4 I), 50 iterations", e1.canonical()),
        (
            "example1-short",
            "as example1 with 25 iterations",
            ExperimentSpec { iterations: 25, ..e1.clone() }.canonical(),
        ),
        (
            "example1-long",
            "as example1 with 200 iterations",
            ExperimentSpec { iterations: 200, ..e1.clone() }.canonical(),
        ),
        ("example2", "10-D three-mode mixture, 25 proposals started in [-10, 10]^10", e2.canonical()),
    ]
}
