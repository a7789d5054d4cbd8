//! Moment-matching proposal updates.
//!
//! [`adapt_component`] is the ESS-gated CAIS rule: the mean always follows
//! the untransformed weights, while the covariance uses them only when the
//! batch ESS reaches `n_t`. Below the threshold the weights are flattened
//! (clipped or tempered) first, which keeps the covariance estimate full
//! rank. [`adapt_basic`] and [`adapt_clipped_moments`] are the two
//! baselines the samplers compare against.

use thiserror::Error;

use crate::linalg::{default_jitter, repair_to_spd, Matrix, SpdMatrix};
use crate::scalar::Real;
use crate::weighting::{
    clip_weights, ess, find_gamma, normalize, temper_weights, WeightError, WeightedBatch, GAMMA_CAP,
};

/// One Gaussian mixand `N(mean, cov)` of the proposal population.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalComponent<T> {
    pub index: usize,
    pub mean: Vec<T>,
    pub cov: SpdMatrix<T>,
}

impl<T: Real> ProposalComponent<T> {
    pub fn new(index: usize, mean: Vec<T>, cov: SpdMatrix<T>) -> Self {
        assert_eq!(mean.len(), cov.dim(), "mean/covariance dimension");
        ProposalComponent { index, mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Transform {
    Clip,
    #[default]
    Temper,
}

/// Where the untransformed-branch covariance is centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MeanCenter {
    /// The freshly computed weighted mean.
    #[default]
    WeightedMean,
    /// The mean of the proposal that generated the batch.
    SamplingMean,
}

/// What to do with a covariance candidate that fails to factorize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Fallback {
    /// Retain the previous covariance without attempting a jitter repair.
    KeepPrevious,
    /// Add escalating diagonal jitter; retain the previous covariance only
    /// when that fails too.
    #[default]
    Repair,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptationError {
    #[error("ESS threshold n_t = {n_t} must satisfy dimension {dim} < n_t < N = {n}")]
    InvalidThreshold { n_t: usize, dim: usize, n: usize },
    #[error("gamma tolerance must be positive")]
    InvalidGammaEps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig<T> {
    /// ESS threshold `N_T` gating the covariance update.
    pub n_t: usize,
    pub transform: Transform,
    /// `|ESS − n_t|` tolerance for the tempering search; `None` means
    /// `max(1, 0.01 N)`.
    pub gamma_eps: Option<T>,
    pub mean_center: MeanCenter,
    /// Starting jitter for repairs; `None` means `1e-9 · trace / d` of the
    /// candidate.
    pub jitter0: Option<T>,
    pub fallback: Fallback,
}

impl<T: Real> AdaptationConfig<T> {
    pub fn new(n_t: usize) -> Self {
        AdaptationConfig {
            n_t,
            transform: Transform::default(),
            gamma_eps: None,
            mean_center: MeanCenter::default(),
            jitter0: None,
            fallback: Fallback::default(),
        }
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_mean_center(mut self, mean_center: MeanCenter) -> Self {
        self.mean_center = mean_center;
        self
    }

    /// Checks `dim < n_t < n` and a positive gamma tolerance.
    pub fn validate(&self, dim: usize, n: usize) -> Result<(), AdaptationError> {
        if self.n_t <= dim || self.n_t >= n {
            return Err(AdaptationError::InvalidThreshold { n_t: self.n_t, dim, n });
        }
        if let Some(eps) = self.gamma_eps {
            if !(eps > T::zero()) {
                return Err(AdaptationError::InvalidGammaEps);
            }
        }
        Ok(())
    }

    pub fn gamma_eps_for(&self, n: usize) -> T {
        self.gamma_eps.unwrap_or_else(|| T::one().max(T::lit(0.01) * T::from_usize_lossy(n)))
    }
}

/// Which covariance update ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// ESS at or above threshold: untransformed weights.
    Untransformed,
    /// ESS below threshold: clipped or tempered weights.
    Transformed,
    /// All weights were zero; the component was carried forward.
    Degenerate,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Untransformed => "untransformed",
            Branch::Transformed => "transformed",
            Branch::Degenerate => "degenerate",
        }
    }
}

/// Per-component bookkeeping for one adaptation step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationReport<T> {
    /// ESS of the untransformed normalized weights.
    pub ess: T,
    pub branch: Branch,
    pub gamma: Option<T>,
    /// ESS of the weights that drove the covariance update, when transformed.
    pub transformed_ess: Option<T>,
    /// Diagonal jitter added to make the covariance factorizable.
    pub jitter: T,
    /// The candidate covariance was discarded and the previous one kept.
    pub fallback_used: bool,
    pub degenerate: bool,
    /// Tempering could not reach `n_t`; `gamma` is the search cap.
    pub gamma_unreachable: bool,
}

impl<T: Real> AdaptationReport<T> {
    fn new(ess: T, branch: Branch) -> Self {
        AdaptationReport {
            ess,
            branch,
            gamma: None,
            transformed_ess: None,
            jitter: T::zero(),
            fallback_used: false,
            degenerate: false,
            gamma_unreachable: false,
        }
    }

    /// The covariance needed more than the plain factorization.
    pub fn repaired(&self) -> bool {
        self.jitter > T::zero() || self.fallback_used
    }
}

/// `Σ_n w̄⁽ⁿ⁾ x⁽ⁿ⁾`.
pub fn weighted_mean<T: Real>(samples: &Matrix<T>, norm_weights: &[T]) -> Vec<T> {
    let mut mean = vec![T::zero(); samples.cols()];
    for (row, &w) in samples.row_iter().zip(norm_weights) {
        if w == T::zero() {
            continue;
        }
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += w * x;
        }
    }
    mean
}

/// `Σ_n w̄⁽ⁿ⁾ (x⁽ⁿ⁾ − c)(x⁽ⁿ⁾ − c)ᵀ`, exactly symmetric.
pub fn weighted_covariance<T: Real>(samples: &Matrix<T>, norm_weights: &[T], center: &[T]) -> Matrix<T> {
    let d = samples.cols();
    let mut cov = Matrix::zeros(d, d);
    let mut diff = vec![T::zero(); d];
    for (row, &w) in samples.row_iter().zip(norm_weights) {
        if w == T::zero() {
            continue;
        }
        for ((o, &x), &c) in diff.iter_mut().zip(row).zip(center) {
            *o = x - c;
        }
        for i in 0..d {
            let wi = w * diff[i];
            for j in i..d {
                cov[(i, j)] += wi * diff[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    cov
}

/// Unweighted maximum-likelihood covariance `(1/M) Σ (x − c)(x − c)ᵀ`.
pub fn ml_covariance<T: Real>(samples: &Matrix<T>, center: &[T]) -> Matrix<T> {
    let d = samples.cols();
    let mut cov = Matrix::zeros(d, d);
    for row in samples.row_iter() {
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += (row[i] - center[i]) * (row[j] - center[j]);
            }
        }
    }
    let m = T::from_usize_lossy(samples.rows().max(1));
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / m;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// Turns a candidate into a factorized covariance per `cfg.fallback`.
fn finalize_covariance<T: Real>(
    candidate: Matrix<T>,
    prev: &SpdMatrix<T>,
    cfg: &AdaptationConfig<T>,
    report: &mut AdaptationReport<T>,
) -> SpdMatrix<T> {
    match cfg.fallback {
        Fallback::KeepPrevious => match SpdMatrix::new(candidate) {
            Ok(m) if candidate_ok(&m) => m,
            _ => {
                report.fallback_used = true;
                prev.clone()
            }
        },
        Fallback::Repair => {
            let jitter0 = cfg.jitter0.unwrap_or_else(|| default_jitter(&candidate));
            match repair_to_spd(&candidate, jitter0) {
                Ok(r) if candidate_ok(&r.matrix) => {
                    report.jitter = r.jitter;
                    r.matrix
                }
                _ => {
                    report.fallback_used = true;
                    prev.clone()
                }
            }
        }
    }
}

fn candidate_ok<T: Real>(m: &SpdMatrix<T>) -> bool {
    m.entries().is_finite() && m.log_det().is_finite()
}

fn finite_or<T: Real>(mean: Vec<T>, prev: &[T]) -> Vec<T> {
    if mean.iter().all(|v| v.is_finite()) {
        mean
    } else {
        prev.to_vec()
    }
}

fn carry_forward<T: Real>(batch: &WeightedBatch<T>, prev: &ProposalComponent<T>) -> (ProposalComponent<T>, AdaptationReport<T>) {
    let mut report = AdaptationReport::new(batch.ess(), Branch::Degenerate);
    report.degenerate = true;
    (prev.clone(), report)
}

/// Flattens log-weights per `cfg.transform` and normalizes them.
fn transformed_weights<T: Real>(
    log_weights: &[T],
    cfg: &AdaptationConfig<T>,
    report: &mut AdaptationReport<T>,
) -> Result<Vec<T>, WeightError> {
    let transformed = match cfg.transform {
        Transform::Clip => clip_weights(log_weights, cfg.n_t),
        Transform::Temper => {
            let eps = cfg.gamma_eps_for(log_weights.len());
            let gamma = match find_gamma(log_weights, cfg.n_t, eps) {
                Ok(g) => g,
                Err(_) => {
                    report.gamma_unreachable = true;
                    T::lit(GAMMA_CAP)
                }
            };
            report.gamma = Some(gamma);
            temper_weights(log_weights, gamma)
        }
    };
    normalize(&transformed)
}

/// One ESS-gated CAIS update of a single mixand.
pub fn adapt_component<T: Real>(
    batch: &WeightedBatch<T>,
    prev: &ProposalComponent<T>,
    cfg: &AdaptationConfig<T>,
) -> (ProposalComponent<T>, AdaptationReport<T>) {
    if batch.degenerate {
        return carry_forward(batch, prev);
    }
    let eta = ess(&batch.norm_weights);
    let mean = finite_or(weighted_mean(&batch.samples, &batch.norm_weights), &prev.mean);

    if eta >= T::from_usize_lossy(cfg.n_t) {
        let mut report = AdaptationReport::new(eta, Branch::Untransformed);
        let center = match cfg.mean_center {
            MeanCenter::WeightedMean => &mean,
            MeanCenter::SamplingMean => &prev.mean,
        };
        let candidate = weighted_covariance(&batch.samples, &batch.norm_weights, center);
        let cov = finalize_covariance(candidate, &prev.cov, cfg, &mut report);
        return (ProposalComponent::new(prev.index, mean, cov), report);
    }

    let mut report = AdaptationReport::new(eta, Branch::Transformed);
    let cov = match transformed_weights(&batch.log_weights, cfg, &mut report) {
        Ok(tw) => {
            report.transformed_ess = Some(ess(&tw));
            let tempered_mean = weighted_mean(&batch.samples, &tw);
            let candidate = weighted_covariance(&batch.samples, &tw, &tempered_mean);
            finalize_covariance(candidate, &prev.cov, cfg, &mut report)
        }
        Err(_) => {
            report.fallback_used = true;
            prev.cov.clone()
        }
    };
    (ProposalComponent::new(prev.index, mean, cov), report)
}

/// Basic AIS: weighted mean and weighted covariance from the untransformed
/// weights every iteration, whatever the ESS.
pub fn adapt_basic<T: Real>(
    batch: &WeightedBatch<T>,
    prev: &ProposalComponent<T>,
    cfg: &AdaptationConfig<T>,
) -> (ProposalComponent<T>, AdaptationReport<T>) {
    if batch.degenerate {
        return carry_forward(batch, prev);
    }
    let eta = ess(&batch.norm_weights);
    let mut report = AdaptationReport::new(eta, Branch::Untransformed);
    let mean = finite_or(weighted_mean(&batch.samples, &batch.norm_weights), &prev.mean);
    let center = match cfg.mean_center {
        MeanCenter::WeightedMean => &mean,
        MeanCenter::SamplingMean => &prev.mean,
    };
    let candidate = weighted_covariance(&batch.samples, &batch.norm_weights, center);
    let cov = finalize_covariance(candidate, &prev.cov, cfg, &mut report);
    (ProposalComponent::new(prev.index, mean, cov), report)
}

/// N-PMC-style update: weights clipped at the `n_t`-th largest drive both
/// the mean and the covariance.
pub fn adapt_clipped_moments<T: Real>(
    batch: &WeightedBatch<T>,
    prev: &ProposalComponent<T>,
    cfg: &AdaptationConfig<T>,
) -> (ProposalComponent<T>, AdaptationReport<T>) {
    if batch.degenerate {
        return carry_forward(batch, prev);
    }
    let eta = ess(&batch.norm_weights);
    let mut report = AdaptationReport::new(eta, Branch::Transformed);
    let tw = match normalize(&clip_weights(&batch.log_weights, cfg.n_t)) {
        Ok(tw) => tw,
        Err(_) => return carry_forward(batch, prev),
    };
    report.transformed_ess = Some(ess(&tw));
    let mean = finite_or(weighted_mean(&batch.samples, &tw), &prev.mean);
    let center = match cfg.mean_center {
        MeanCenter::WeightedMean => &mean,
        MeanCenter::SamplingMean => &prev.mean,
    };
    let candidate = weighted_covariance(&batch.samples, &tw, center);
    let cov = finalize_covariance(candidate, &prev.cov, cfg, &mut report);
    (ProposalComponent::new(prev.index, mean, cov), report)
}
