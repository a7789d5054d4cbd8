//! Iterative population samplers: CAIS and the two baselines it is
//! measured against.
//!
//! All three share sampling, weighting and linear algebra; they differ only
//! in the per-mixand adaptation rule, so measured differences isolate that
//! rule.

use thiserror::Error;

use crate::adaptation::{
    adapt_basic, adapt_clipped_moments, adapt_component, AdaptationConfig, AdaptationError,
    AdaptationReport, ProposalComponent,
};
use crate::distributions::{mvn_sample, TargetModel};
use crate::linalg::{LinalgError, SpdMatrix};
use crate::rng::RngStreams;
use crate::scalar::Real;
use crate::weighting::{compute_log_weights, WeightedBatch};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("invalid initialization range: lower {lower} must be below upper {upper}")]
    InvalidRange { lower: f64, upper: f64 },
    #[error("proposal dimension {proposal} does not match target dimension {target}")]
    DimensionMismatch { proposal: usize, target: usize },
    #[error("run plan needs at least one component, sample and iteration")]
    EmptyPlan,
    #[error(transparent)]
    Config(#[from] AdaptationError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// How the initial population is placed.
#[derive(Debug, Clone)]
pub enum InitScheme<T> {
    /// Every mixand starts at the same mean and covariance.
    Fixed { mean: Vec<T>, cov: SpdMatrix<T> },
    /// Means uniform on `[lower, upper]^dim`, covariances `sigma² I`.
    UniformHypercube { dim: usize, lower: T, upper: T, sigma: T },
}

impl<T: Real> InitScheme<T> {
    pub fn dim(&self) -> usize {
        match self {
            InitScheme::Fixed { mean, .. } => mean.len(),
            InitScheme::UniformHypercube { dim, .. } => *dim,
        }
    }
}

/// Population size `D`, per-mixand sample count `N` and iteration count `I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunPlan {
    pub components: usize,
    pub samples_per_component: usize,
    pub iterations: usize,
}

impl RunPlan {
    /// Target evaluations the plan performs: `D · N · I`.
    pub fn evaluations(&self) -> u64 {
        (self.components as u64) * (self.samples_per_component as u64) * (self.iterations as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Cais,
    BasicAis,
    NpmcStyle,
}

impl SamplerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerKind::Cais => "cais",
            SamplerKind::BasicAis => "basic_ais",
            SamplerKind::NpmcStyle => "npmc_style",
        }
    }

    fn adapt<T: Real>(
        &self,
        batch: &WeightedBatch<T>,
        prev: &ProposalComponent<T>,
        cfg: &AdaptationConfig<T>,
    ) -> (ProposalComponent<T>, AdaptationReport<T>) {
        match self {
            SamplerKind::Cais => adapt_component(batch, prev, cfg),
            SamplerKind::BasicAis => adapt_basic(batch, prev, cfg),
            SamplerKind::NpmcStyle => adapt_clipped_moments(batch, prev, cfg),
        }
    }
}

/// Draws the initial population from `streams.init()`.
pub fn init_population<T: Real>(
    init: &InitScheme<T>,
    components: usize,
    streams: &RngStreams,
) -> Result<Vec<ProposalComponent<T>>, SamplerError> {
    match init {
        InitScheme::Fixed { mean, cov } => {
            if mean.len() != cov.dim() {
                return Err(LinalgError::DimensionMismatch { expected: cov.dim(), got: mean.len() }.into());
            }
            Ok((0..components).map(|d| ProposalComponent::new(d, mean.clone(), cov.clone())).collect())
        }
        InitScheme::UniformHypercube { dim, lower, upper, sigma } => {
            if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                return Err(SamplerError::InvalidRange {
                    lower: lower.to_f64().unwrap_or(f64::NAN),
                    upper: upper.to_f64().unwrap_or(f64::NAN),
                });
            }
            let mut rng = streams.init();
            let cov = SpdMatrix::scaled_identity(*dim, *sigma * *sigma);
            Ok((0..components)
                .map(|d| {
                    let mean = (0..*dim).map(|_| T::uniform(&mut rng, *lower, *upper)).collect();
                    ProposalComponent::new(d, mean, cov.clone())
                })
                .collect())
        }
    }
}

/// Everything produced by one iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord<T> {
    /// 1-based.
    pub iteration: usize,
    pub batches: Vec<WeightedBatch<T>>,
    pub reports: Vec<AdaptationReport<T>>,
    /// Population after this iteration's adaptation.
    pub components: Vec<ProposalComponent<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats<T> {
    pub mean_ess: T,
    pub ess: Vec<T>,
    pub degenerate: Vec<bool>,
}

/// Population plus the history of completed iterations.
#[derive(Debug, Clone)]
pub struct SamplerState<T> {
    pub components: Vec<ProposalComponent<T>>,
    /// Completed iterations.
    pub iteration: usize,
    pub history: Vec<IterationRecord<T>>,
}

impl<T: Real> SamplerState<T> {
    pub fn new(components: Vec<ProposalComponent<T>>) -> Self {
        SamplerState { components, iteration: 0, history: Vec::new() }
    }

    /// Sample, weight and adapt every mixand once.
    pub fn step<M: TargetModel<T> + ?Sized>(
        &mut self,
        kind: SamplerKind,
        target: &M,
        samples_per_component: usize,
        cfg: &AdaptationConfig<T>,
        streams: &RngStreams,
    ) -> Result<(), SamplerError> {
        let iteration = self.iteration + 1;
        let mut batches = Vec::with_capacity(self.components.len());
        let mut reports = Vec::with_capacity(self.components.len());
        let mut next = Vec::with_capacity(self.components.len());
        for comp in &self.components {
            let mut rng = streams.sampling(iteration, comp.index);
            let samples = mvn_sample(&mut rng, &comp.mean, &comp.cov, samples_per_component)?;
            let log_weights = compute_log_weights(&samples, target, comp);
            let batch = WeightedBatch::new(samples, log_weights, comp.index, iteration);
            let (adapted, report) = kind.adapt(&batch, comp, cfg);
            batches.push(batch);
            reports.push(report);
            next.push(adapted);
        }
        self.components = next.clone();
        self.iteration = iteration;
        self.history.push(IterationRecord { iteration, batches, reports, components: next });
        Ok(())
    }
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct SamplerOutput<T> {
    pub kind: SamplerKind,
    pub initial_components: Vec<ProposalComponent<T>>,
    pub history: Vec<IterationRecord<T>>,
    pub final_components: Vec<ProposalComponent<T>>,
}

impl<T: Real> SamplerOutput<T> {
    /// Every `(sample, raw log-weight)` pair over all iterations and mixands.
    pub fn pairs(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.history.iter().flat_map(|rec| rec.batches.iter()).flat_map(batch_pairs)
    }

    /// Pairs from the final iteration only.
    pub fn last_iteration_pairs(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.history.last().into_iter().flat_map(|rec| rec.batches.iter()).flat_map(batch_pairs)
    }

    pub fn pair_count(&self) -> usize {
        self.history.iter().flat_map(|r| r.batches.iter()).map(|b| b.len()).sum()
    }

    pub fn per_iteration_stats(&self) -> Vec<IterationStats<T>> {
        self.history
            .iter()
            .map(|rec| {
                let ess: Vec<T> = rec.batches.iter().map(|b| b.ess()).collect();
                let mean_ess = ess.iter().copied().sum::<T>() / T::from_usize_lossy(ess.len().max(1));
                IterationStats { mean_ess, ess, degenerate: rec.batches.iter().map(|b| b.degenerate).collect() }
            })
            .collect()
    }

    pub fn reports(&self) -> impl Iterator<Item = &AdaptationReport<T>> + '_ {
        self.history.iter().flat_map(|r| r.reports.iter())
    }
}

fn batch_pairs<T: Real>(b: &WeightedBatch<T>) -> impl Iterator<Item = (&[T], T)> + '_ {
    b.samples.row_iter().zip(b.log_weights.iter().copied())
}

fn check_plan<T: Real, M: TargetModel<T> + ?Sized>(
    target: &M,
    init: &InitScheme<T>,
    plan: &RunPlan,
) -> Result<(), SamplerError> {
    if plan.components == 0 || plan.samples_per_component == 0 || plan.iterations == 0 {
        return Err(SamplerError::EmptyPlan);
    }
    if init.dim() != target.dim() {
        return Err(SamplerError::DimensionMismatch { proposal: init.dim(), target: target.dim() });
    }
    Ok(())
}

/// Runs `plan.iterations` iterations of the sampler selected by `kind`.
pub fn run_sampler<T: Real, M: TargetModel<T> + ?Sized>(
    kind: SamplerKind,
    target: &M,
    init: &InitScheme<T>,
    plan: &RunPlan,
    cfg: &AdaptationConfig<T>,
    streams: &RngStreams,
) -> Result<SamplerOutput<T>, SamplerError> {
    check_plan(target, init, plan)?;
    if kind != SamplerKind::BasicAis {
        cfg.validate(target.dim(), plan.samples_per_component)?;
    }
    let initial = init_population(init, plan.components, streams)?;
    let mut state = SamplerState::new(initial.clone());
    for _ in 0..plan.iterations {
        state.step(kind, target, plan.samples_per_component, cfg, streams)?;
    }
    Ok(SamplerOutput {
        kind,
        initial_components: initial,
        final_components: state.components,
        history: state.history,
    })
}

/// Covariance adaptive importance sampling.
pub fn cais_run<T: Real, M: TargetModel<T> + ?Sized>(
    target: &M,
    init: &InitScheme<T>,
    plan: &RunPlan,
    cfg: &AdaptationConfig<T>,
    streams: &RngStreams,
) -> Result<SamplerOutput<T>, SamplerError> {
    run_sampler(SamplerKind::Cais, target, init, plan, cfg, streams)
}

/// Basic AIS: ungated covariance updates from the untransformed weights.
/// Only `mean_center`, `jitter0` and `fallback` of `cfg` are used.
pub fn basic_ais_run<T: Real, M: TargetModel<T> + ?Sized>(
    target: &M,
    init: &InitScheme<T>,
    plan: &RunPlan,
    cfg: &AdaptationConfig<T>,
    streams: &RngStreams,
) -> Result<SamplerOutput<T>, SamplerError> {
    run_sampler(SamplerKind::BasicAis, target, init, plan, cfg, streams)
}

/// N-PMC-style baseline: clipped weights drive both mean and covariance.
pub fn npmc_baseline_run<T: Real, M: TargetModel<T> + ?Sized>(
    target: &M,
    init: &InitScheme<T>,
    plan: &RunPlan,
    cfg: &AdaptationConfig<T>,
    streams: &RngStreams,
) -> Result<SamplerOutput<T>, SamplerError> {
    run_sampler(SamplerKind::NpmcStyle, target, init, plan, cfg, streams)
}
