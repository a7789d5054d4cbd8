//! Seeded Monte Carlo suites: replicate execution, CSV output and manifest.

use std::fs;
use std::path::{Path, PathBuf};

use cais_core::adaptation::Branch;
use cais_core::diagnostics::{estimate_mean, estimate_z, mse_of_mean, EstimatorPool};
use cais_core::distributions::{
    make_example1_target, make_example2_target, make_gaussian_target, DistributionError, TargetModel,
};
use cais_core::rng::RngStreams;
use cais_core::samplers::{run_sampler, SamplerError};
use cais_core::weighting::WeightError;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{transform_str, BudgetExceeded, ConfigError, ExperimentSpec, Preset};

pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("sampler: {0}")]
    Sampler(#[from] SamplerError),
    #[error("target setup: {0}")]
    Target(#[from] DistributionError),
    #[error("estimate: {0}")]
    Estimate(#[from] WeightError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    /// Process exit status: 2 for configuration errors, 3 for the budget
    /// guard, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Budget(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}

/// One line of `iterations.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRow {
    pub run: usize,
    pub iter: usize,
    pub component: usize,
    pub ess: f64,
    pub branch: &'static str,
    pub gamma: Option<f64>,
    pub kl: Option<f64>,
    pub min_eig: f64,
}

/// Per-replicate results kept in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub run: usize,
    pub rows: Vec<IterationRow>,
    pub mean_estimate: Vec<f64>,
    pub z_hat: f64,
    /// KL of each component after the first iteration, averaged over components.
    pub first_kl: Option<f64>,
    /// KL after the final iteration, averaged over components.
    pub final_kl: Option<f64>,
    /// Smallest eigenvalue over the final population's covariances.
    pub final_min_eig: f64,
    pub repair_events: usize,
    pub degenerate_batches: usize,
    pub gamma_unreachable: usize,
}

impl Replicate {
    /// Mean over components of the KL recorded at 1-based iteration `iter`.
    pub fn kl_at(&self, iter: usize) -> Option<f64> {
        let kls: Vec<f64> = self.rows.iter().filter(|r| r.iter == iter).filter_map(|r| r.kl).collect();
        (!kls.is_empty()).then(|| kls.iter().sum::<f64>() / kls.len() as f64)
    }
}

/// The single line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub preset: &'static str,
    pub method: String,
    pub sampler: &'static str,
    pub transform: &'static str,
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
    pub degenerate_batches: usize,
    pub gamma_unreachable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub spec: ExperimentSpec,
    pub replicates: Vec<Replicate>,
    pub summary: SummaryRow,
}

impl SuiteResult {
    pub fn rows(&self) -> impl Iterator<Item = &IterationRow> + '_ {
        self.replicates.iter().flat_map(|r| r.rows.iter())
    }
}

/// Builds the experiment target from the seed's target-setup stream, so
/// every replicate of a suite sees the same target.
pub fn build_target(spec: &ExperimentSpec) -> Result<Box<dyn TargetModel<f64>>, DistributionError> {
    let mut rng = RngStreams::new(spec.seed, 0).target_setup();
    Ok(match spec.preset {
        Preset::Example1 => Box::new(make_example1_target::<f64, _>(&mut rng)?),
        Preset::Example2 => Box::new(make_example2_target::<f64, _>(&mut rng)?),
        Preset::Custom => Box::new(make_gaussian_target::<f64, _>(&mut rng, spec.dimension)?),
    })
}

/// Runs replicate `run` of `spec` against `target`.
pub fn run_replicate(
    spec: &ExperimentSpec,
    target: &dyn TargetModel<f64>,
    run: usize,
) -> Result<Replicate, HarnessError> {
    let streams = RngStreams::new(spec.seed, run as u64);
    let out = run_sampler(spec.sampler, target, &spec.init_scheme(), &spec.plan(), &spec.adaptation(), &streams)?;

    let gaussian = target.as_gaussian();
    let mut rows = Vec::with_capacity(spec.iterations * spec.components);
    for rec in &out.history {
        for (comp, report) in rec.components.iter().zip(&rec.reports) {
            let kl = gaussian
                .map(|g| spec.kl_direction.kl(g, (&comp.mean[..], &comp.cov)).unwrap_or(f64::INFINITY));
            rows.push(IterationRow {
                run,
                iter: rec.iteration,
                component: comp.index,
                ess: report.ess,
                branch: report.branch.as_str(),
                gamma: report.gamma,
                kl,
                min_eig: comp.cov.min_eigenvalue(),
            });
        }
    }

    let reports: Vec<_> = out.reports().collect();
    let mut replicate = Replicate {
        run,
        first_kl: None,
        final_kl: None,
        rows,
        mean_estimate: estimate_mean(&out, EstimatorPool::AllIterations)?,
        z_hat: estimate_z(&out, EstimatorPool::AllIterations),
        final_min_eig: out.final_components.iter().map(|c| c.cov.min_eigenvalue()).fold(f64::INFINITY, f64::min),
        repair_events: reports.iter().filter(|r| r.repaired()).count(),
        degenerate_batches: reports.iter().filter(|r| r.degenerate || r.branch == Branch::Degenerate).count(),
        gamma_unreachable: reports.iter().filter(|r| r.gamma_unreachable).count(),
    };
    replicate.first_kl = replicate.kl_at(1);
    replicate.final_kl = replicate.kl_at(spec.iterations);
    Ok(replicate)
}

/// Runs every replicate of `spec` in memory on up to `workers` threads
/// (`0` picks the number of cores). Results come back in replicate order.
pub fn execute(spec: &ExperimentSpec, workers: usize) -> Result<SuiteResult, HarnessError> {
    spec.check_budget()?;
    let target = build_target(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let replicates: Vec<Replicate> = pool.install(|| {
        (0..spec.runs)
            .into_par_iter()
            .map(|run| run_replicate(spec, target.as_ref(), run))
            .collect::<Result<_, _>>()
    })?;

    let truth = target.truth().map(|t| t.mean.clone()).unwrap_or_else(|| vec![0.0; spec.dimension]);
    let estimates: Vec<Vec<f64>> = replicates.iter().map(|r| r.mean_estimate.clone()).collect();
    let n = replicates.len() as f64;
    let final_kls: Vec<f64> = replicates.iter().filter_map(|r| r.final_kl).collect();
    let summary = SummaryRow {
        preset: spec.preset.as_str(),
        method: spec.method(),
        sampler: spec.sampler.as_str(),
        transform: transform_str(spec.transform),
        components: spec.components,
        samples: spec.samples,
        iterations: spec.iterations,
        n_t: spec.n_t,
        sigma: spec.sigma,
        runs: spec.runs,
        seed: spec.seed,
        mse_mean: mse_of_mean(&estimates, &truth),
        z_hat: replicates.iter().map(|r| r.z_hat).sum::<f64>() / n,
        final_kl: (!final_kls.is_empty()).then(|| final_kls.iter().sum::<f64>() / final_kls.len() as f64),
        repair_events: replicates.iter().map(|r| r.repair_events).sum(),
        degenerate_batches: replicates.iter().map(|r| r.degenerate_batches).sum(),
        gamma_unreachable: replicates.iter().map(|r| r.gamma_unreachable).sum(),
    };
    Ok(SuiteResult { spec: spec.clone(), replicates, summary })
}

pub(crate) fn csv_bytes<S: Serialize>(rows: impl IntoIterator<Item = S>) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))
}

pub(crate) fn manifest(spec_text: &str, seed: u64, outputs: &[(&str, &[u8])]) -> String {
    let mut m = format!(
        "cais-bench {}\nspec_sha256 = {}\nseed = {seed}\n",
        env!("CARGO_PKG_VERSION"),
        sha256_hex(spec_text.as_bytes())
    );
    for (name, bytes) in outputs {
        m.push_str(&format!("{name} sha256 = {}\n", sha256_hex(bytes)));
    }
    m.push_str("\n[spec]\n");
    m.push_str(spec_text);
    m
}

/// Writes `iterations.csv`, `summary.csv` and `manifest.txt` into `dir`.
pub fn write_outputs(result: &SuiteResult, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let iterations = csv_bytes(result.rows())?;
    let summary = csv_bytes([&result.summary])?;
    let spec_text = result.spec.canonical();
    let manifest = manifest(&spec_text, result.spec.seed, &[(ITERATIONS_FILE, &iterations), (SUMMARY_FILE, &summary)]);
    write_file(dir, ITERATIONS_FILE, &iterations)?;
    write_file(dir, SUMMARY_FILE, &summary)?;
    write_file(dir, MANIFEST_FILE, manifest.as_bytes())
}

/// Executes `spec` and writes its output files into `dir`.
pub fn run_suite(spec: &ExperimentSpec, workers: usize, dir: &Path) -> Result<SuiteResult, HarnessError> {
    let result = execute(spec, workers)?;
    write_outputs(&result, dir)?;
    Ok(result)
}
