//! Parameter sweeps aggregated into a method × value MSE table.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::config::{parse_sampler, parse_transform, ConfigError, ExperimentSpec, Threshold};
use crate::suite::{csv_bytes, execute, manifest, write_file, HarnessError, SuiteResult, SummaryRow};

pub const SWEEP_TABLE_FILE: &str = "sweep.csv";
pub const SWEEP_LONG_FILE: &str = "sweep_long.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    Sigma,
    Threshold,
    Components,
    Transform,
    Sampler,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Sigma => "sigma",
            SweepParam::Threshold => "n_t",
            SweepParam::Components => "D",
            SweepParam::Transform => "transform",
            SweepParam::Sampler => "sampler",
        }
    }

    /// Copy of `spec` with this parameter set to `value`, re-validated.
    pub fn apply(&self, spec: &ExperimentSpec, value: &str) -> Result<ExperimentSpec, ConfigError> {
        let field = |m: String| ConfigError::Field { field: self.as_str().to_string(), message: m };
        let mut s = spec.clone();
        match self {
            SweepParam::Sigma => s.sigma = value.parse().map_err(|_| field(format!("`{value}` is not a number")))?,
            SweepParam::Threshold => s.threshold = value.parse::<Threshold>().map_err(field)?,
            SweepParam::Components => {
                s.components = value.parse().map_err(|_| field(format!("`{value}` is not a count")))?
            }
            SweepParam::Transform => s.transform = parse_transform(value).map_err(field)?,
            SweepParam::Sampler => s.sampler = parse_sampler(value).map_err(field)?,
        }
        s.resolve()
    }
}

impl FromStr for SweepParam {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "sigma" => Ok(SweepParam::Sigma),
            "n_t" => Ok(SweepParam::Threshold),
            "D" => Ok(SweepParam::Components),
            "transform" => Ok(SweepParam::Transform),
            "sampler" => Ok(SweepParam::Sampler),
            other => Err(ConfigError::Field {
                field: "param".into(),
                message: format!("cannot sweep `{other}`; expected sigma, n_t, D, transform or sampler"),
            }),
        }
    }
}

/// Row label for a base config, leaving out the swept parameter.
pub fn label(spec: &ExperimentSpec, param: SweepParam) -> String {
    let mut parts = Vec::new();
    if !matches!(param, SweepParam::Sampler | SweepParam::Transform) {
        parts.push(spec.method());
    } else if param == SweepParam::Transform {
        parts.push(spec.sampler.as_str().to_string());
    }
    if param != SweepParam::Components {
        parts.push(format!("D={}", spec.components));
    }
    parts.push(format!("N={}", spec.samples));
    if param != SweepParam::Threshold {
        parts.push(format!("n_t={}", spec.threshold));
    }
    if param != SweepParam::Sigma {
        parts.push(format!("sigma={}", spec.sigma));
    }
    parts.join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepLongRow {
    pub config: String,
    pub param: &'static str,
    pub value: String,
    pub method: String,
    #[serde(rename = "D")]
    pub components: usize,
    #[serde(rename = "N")]
    pub samples: usize,
    #[serde(rename = "I")]
    pub iterations: usize,
    pub n_t: usize,
    pub sigma: f64,
    pub runs: usize,
    pub seed: u64,
    pub mse_mean: f64,
    pub z_hat: f64,
    pub final_kl: Option<f64>,
    pub repair_events: usize,
}

impl SweepLongRow {
    fn new(config: &str, param: SweepParam, value: &str, s: &SummaryRow) -> Self {
        SweepLongRow {
            config: config.to_string(),
            param: param.as_str(),
            value: value.to_string(),
            method: s.method.clone(),
            components: s.components,
            samples: s.samples,
            iterations: s.iterations,
            n_t: s.n_t,
            sigma: s.sigma,
            runs: s.runs,
            seed: s.seed,
            mse_mean: s.mse_mean,
            z_hat: s.z_hat,
            final_kl: s.final_kl,
            repair_events: s.repair_events,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: SweepParam,
    pub values: Vec<String>,
    /// One entry per base config: its label and one suite per value.
    pub rows: Vec<(String, Vec<SuiteResult>)>,
}

impl SweepResult {
    /// Header plus one line per config; cells are the suite MSE.
    pub fn table(&self) -> Vec<Vec<String>> {
        let mut header = vec!["method".to_string()];
        header.extend(self.values.iter().map(|v| format!("{}={v}", self.param.as_str())));
        let mut out = vec![header];
        for (name, suites) in &self.rows {
            let mut line = vec![name.clone()];
            line.extend(suites.iter().map(|s| s.summary.mse_mean.to_string()));
            out.push(line);
        }
        out
    }

    pub fn long_rows(&self) -> Vec<SweepLongRow> {
        self.rows
            .iter()
            .flat_map(|(name, suites)| {
                suites.iter().zip(&self.values).map(move |(s, v)| SweepLongRow::new(name, self.param, v, &s.summary))
            })
            .collect()
    }
}

/// Runs every base config at every value of `param`.
///
/// All specs are resolved and budget-checked before anything runs.
pub fn sweep(
    specs: &[ExperimentSpec],
    param: SweepParam,
    values: &[String],
    workers: usize,
) -> Result<SweepResult, HarnessError> {
    if values.is_empty() {
        return Err(ConfigError::Field { field: "values".into(), message: "at least one value is required".into() }.into());
    }
    if specs.is_empty() {
        return Err(ConfigError::Field { field: "config".into(), message: "at least one config is required".into() }.into());
    }
    let grid: Vec<(String, Vec<ExperimentSpec>)> = specs
        .iter()
        .map(|base| {
            let runs = values.iter().map(|v| param.apply(base, v)).collect::<Result<Vec<_>, _>>()?;
            Ok((label(base, param), runs))
        })
        .collect::<Result<_, ConfigError>>()?;
    for (_, runs) in &grid {
        for s in runs {
            s.check_budget()?;
        }
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (name, runs) in grid {
        let suites = runs.iter().map(|s| execute(s, workers)).collect::<Result<Vec<_>, _>>()?;
        rows.push((name, suites));
    }
    Ok(SweepResult { param, values: values.to_vec(), rows })
}

/// Writes `sweep.csv`, `sweep_long.csv` and `manifest.txt` into `dir`.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let table = csv_bytes(result.table())?;
    let long = csv_bytes(result.long_rows())?;
    let mut spec_text = format!("param = \"{}\"\nvalues = {:?}\n", result.param.as_str(), result.values);
    for (name, suites) in &result.rows {
        if let Some(first) = suites.first() {
            spec_text.push_str(&format!("\n# {name}\n{}", first.spec.canonical()));
        }
    }
    let seed = result.rows.first().and_then(|(_, s)| s.first()).map_or(0, |s| s.spec.seed);
    let m = manifest(&spec_text, seed, &[(SWEEP_TABLE_FILE, &table), (SWEEP_LONG_FILE, &long)]);
    write_file(dir, SWEEP_TABLE_FILE, &table)?;
    write_file(dir, SWEEP_LONG_FILE, &long)?;
    write_file(dir, crate::suite::MANIFEST_FILE, m.as_bytes())
}
