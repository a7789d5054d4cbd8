//! Estimators and health metrics computed from sampler output.

use crate::linalg::{LinalgError, SpdMatrix};
use crate::samplers::SamplerOutput;
use crate::scalar::{compensated_sum, log_sum_exp, Real};
use crate::weighting::WeightError;

/// One row of per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord<T> {
    pub run_id: usize,
    pub iteration: usize,
    pub component: usize,
    pub ess: T,
    pub kl_to_target: Option<T>,
    pub min_eig: T,
    pub max_eig: T,
    pub mse_mean: Option<T>,
    pub z_hat: Option<T>,
}

/// Self-normalized estimate `Σ w̄ g(x)` over all supplied pairs, with a
/// single global normalization.
pub fn self_normalized_estimate<'a, T, I, G>(pairs: I, g: G) -> Result<Vec<T>, WeightError>
where
    T: Real,
    I: IntoIterator<Item = (&'a [T], T)>,
    G: Fn(&[T]) -> Vec<T>,
{
    let pairs: Vec<(&[T], T)> = pairs.into_iter().collect();
    let max = pairs.iter().map(|p| p.1).filter(|v| !v.is_nan()).fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Err(WeightError::AllWeightsZero);
    }
    let weights: Vec<T> =
        pairs.iter().map(|&(_, lw)| if lw.is_nan() { T::zero() } else { (lw - max).exp() }).collect();
    let total = compensated_sum(weights.iter().copied());
    let mut acc: Option<Vec<T>> = None;
    for ((x, _), &w) in pairs.iter().zip(&weights) {
        let gx = g(x);
        let acc = acc.get_or_insert_with(|| vec![T::zero(); gx.len()]);
        if w == T::zero() {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(gx) {
            *a += w * v;
        }
    }
    Ok(acc.unwrap_or_default().into_iter().map(|a| a / total).collect())
}

/// Normalizing-constant estimate `(1/n_total) Σ exp(log w)`.
pub fn z_estimate<T: Real, I: IntoIterator<Item = T>>(log_weights: I, n_total: usize) -> T {
    let lw: Vec<T> = log_weights.into_iter().collect();
    (log_sum_exp(&lw) - T::from_usize_lossy(n_total).ln()).exp()
}

/// `KL(N(mu0, cov0) ‖ N(mu1, cov1))` in closed form.
pub fn kl_gaussians<T: Real>(
    mu0: &[T],
    cov0: &SpdMatrix<T>,
    mu1: &[T],
    cov1: &SpdMatrix<T>,
) -> Result<T, LinalgError> {
    let d = cov1.dim();
    if cov0.dim() != d {
        return Err(LinalgError::DimensionMismatch { expected: d, got: cov0.dim() });
    }
    let trace = cov1.trace_inv_times(cov0.entries())?;
    let maha = cov1.mahalanobis_sq(mu0, mu1)?;
    let half = T::lit(0.5);
    let kl = half * (trace + maha - T::from_usize_lossy(d) + cov1.log_det() - cov0.log_det());
    Ok(kl.max(T::zero()))
}

/// Which way round KL between target and proposal is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KlDirection {
    /// `KL(target ‖ proposal)`: large when the proposal misses target mass.
    #[default]
    TargetToProposal,
    /// `KL(proposal ‖ target)`.
    ProposalToTarget,
}

impl KlDirection {
    pub fn kl<T: Real>(
        &self,
        target: (&[T], &SpdMatrix<T>),
        proposal: (&[T], &SpdMatrix<T>),
    ) -> Result<T, LinalgError> {
        match self {
            KlDirection::TargetToProposal => kl_gaussians(target.0, target.1, proposal.0, proposal.1),
            KlDirection::ProposalToTarget => kl_gaussians(proposal.0, proposal.1, target.0, target.1),
        }
    }
}

/// Average over runs of `‖estimate − truth‖²`.
pub fn mse_of_mean<T: Real>(estimates: &[Vec<T>], truth: &[T]) -> T {
    let per_run = estimates.iter().map(|e| {
        compensated_sum(e.iter().zip(truth).map(|(&a, &b)| (a - b) * (a - b)))
    });
    compensated_sum(per_run) / T::from_usize_lossy(estimates.len().max(1))
}

/// Sorted spectra of an adapted covariance and a reference, side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport<T> {
    pub cov: Vec<T>,
    pub reference: Vec<T>,
}

pub fn spectrum_report<T: Real>(cov: &SpdMatrix<T>, reference: &SpdMatrix<T>) -> Result<SpectrumReport<T>, LinalgError> {
    if cov.dim() != reference.dim() {
        return Err(LinalgError::DimensionMismatch { expected: reference.dim(), got: cov.dim() });
    }
    Ok(SpectrumReport { cov: cov.eigen_spectrum(), reference: reference.eigen_spectrum() })
}

/// Which pairs feed the final estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EstimatorPool {
    #[default]
    AllIterations,
    LastIteration,
}

/// Self-normalized posterior-mean estimate from a run.
pub fn estimate_mean<T: Real>(out: &SamplerOutput<T>, pool: EstimatorPool) -> Result<Vec<T>, WeightError> {
    let identity = |x: &[T]| x.to_vec();
    match pool {
        EstimatorPool::AllIterations => self_normalized_estimate(out.pairs(), identity),
        EstimatorPool::LastIteration => self_normalized_estimate(out.last_iteration_pairs(), identity),
    }
}

/// Normalizing-constant estimate from a run.
pub fn estimate_z<T: Real>(out: &SamplerOutput<T>, pool: EstimatorPool) -> T {
    match pool {
        EstimatorPool::AllIterations => z_estimate(out.pairs().map(|p| p.1), out.pair_count()),
        EstimatorPool::LastIteration => {
            let n = out.last_iteration_pairs().count();
            z_estimate(out.last_iteration_pairs().map(|p| p.1), n)
        }
    }
}
