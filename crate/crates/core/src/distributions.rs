//! Gaussian densities and samplers, Gaussian-mixture targets, Wishart draws,
//! and the [`TargetModel`] abstraction the samplers evaluate.

use rand::Rng;
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix, SpdMatrix};
use crate::scalar::{log_sum_exp, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("mixture must have at least one component")]
    EmptyMixture,
    #[error("mixture weights must be positive and sum to 1 (sum = {sum})")]
    InvalidWeights { sum: f64 },
    #[error("mixture component {index} has dimension {got}, expected {expected}")]
    ComponentDimension { index: usize, expected: usize, got: usize },
    #[error("wishart degrees of freedom {dof} below dimension {dim}")]
    InvalidDof { dof: usize, dim: usize },
}

/// Analytic facts about a synthetic target.
#[derive(Debug, Clone)]
pub struct GroundTruth<T> {
    pub mean: Vec<T>,
    pub cov: SpdMatrix<T>,
    /// Normalizing constant `Z = ∫ π`.
    pub z: T,
}

/// Unnormalized log target `log π(x)`.
pub trait TargetModel<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    /// Finite or `-∞`; never NaN for finite `x`.
    fn log_density(&self, x: &[T]) -> T;

    fn truth(&self) -> Option<&GroundTruth<T>> {
        None
    }

    /// Mean and covariance when the target is itself a Gaussian, which
    /// makes closed-form KL available.
    fn as_gaussian(&self) -> Option<(&[T], &SpdMatrix<T>)> {
        None
    }
}

/// `−(d/2) ln 2π − ½ ln|Σ| − ½ (x−μ)ᵀ Σ⁻¹ (x−μ)`.
pub fn mvn_log_pdf<T: Real>(x: &[T], mu: &[T], cov: &SpdMatrix<T>) -> Result<T, LinalgError> {
    let maha = cov.mahalanobis_sq(x, mu)?;
    Ok(gaussian_log_norm(cov) - T::lit(0.5) * maha)
}

fn gaussian_log_norm<T: Real>(cov: &SpdMatrix<T>) -> T {
    let d = T::from_usize_lossy(cov.dim());
    let half = T::lit(0.5);
    -half * d * T::lit(std::f64::consts::TAU).ln() - half * cov.log_det()
}

/// Draws `n` rows `mu + L z`, `z ~ N(0, I)`.
pub fn mvn_sample<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    mu: &[T],
    cov: &SpdMatrix<T>,
    n: usize,
) -> Result<Matrix<T>, LinalgError> {
    let d = cov.dim();
    if mu.len() != d {
        return Err(LinalgError::DimensionMismatch { expected: d, got: mu.len() });
    }
    let mut out = Matrix::zeros(n, d);
    let mut z = vec![T::zero(); d];
    for i in 0..n {
        for v in z.iter_mut() {
            *v = T::standard_normal(rng);
        }
        let lz = cov.lower_mul(&z);
        for ((o, &m), &dz) in out.row_mut(i).iter_mut().zip(mu).zip(&lz) {
            *o = m + dz;
        }
    }
    Ok(out)
}

/// Bartlett draw from `Wishart(scale, dof)`: `L A Aᵀ Lᵀ` with `L` the factor
/// of `scale` and `A` lower triangular, `A_ii ~ χ(dof − i)` (0-based `i`)
/// and standard normal entries below the diagonal.
pub fn wishart_sample<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    scale: &SpdMatrix<T>,
    dof: usize,
) -> Result<SpdMatrix<T>, DistributionError> {
    let d = scale.dim();
    if dof < d {
        return Err(DistributionError::InvalidDof { dof, dim: d });
    }
    let mut a = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..i {
            a[(i, j)] = T::standard_normal(rng);
        }
        a[(i, i)] = T::chi_squared(rng, T::from_usize_lossy(dof - i)).sqrt();
    }
    let b = scale.chol().matmul(&a)?;
    let w = b.matmul(&b.transpose())?;
    Ok(SpdMatrix::new(w)?)
}

/// Equal-or-weighted Gaussian mixture `Σ_k w_k N(ν_k, Λ_k)`.
#[derive(Debug, Clone)]
pub struct GaussianMixtureSpec<T> {
    weights: Vec<T>,
    log_weights: Vec<T>,
    means: Vec<Vec<T>>,
    covs: Vec<SpdMatrix<T>>,
}

impl<T: Real> GaussianMixtureSpec<T> {
    pub fn new(
        weights: Vec<T>,
        means: Vec<Vec<T>>,
        covs: Vec<SpdMatrix<T>>,
    ) -> Result<Self, DistributionError> {
        if weights.is_empty() {
            return Err(DistributionError::EmptyMixture);
        }
        let sum: T = weights.iter().copied().sum();
        let bad = weights.iter().any(|&w| !(w > T::zero()))
            || (sum - T::one()).abs() > T::epsilon() * T::lit(4096.0);
        if bad || means.len() != weights.len() || covs.len() != weights.len() {
            return Err(DistributionError::InvalidWeights { sum: sum.to_f64().unwrap_or(f64::NAN) });
        }
        let d = means[0].len();
        for (index, (m, c)) in means.iter().zip(&covs).enumerate() {
            for got in [m.len(), c.dim()] {
                if got != d {
                    return Err(DistributionError::ComponentDimension { index, expected: d, got });
                }
            }
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(GaussianMixtureSpec { weights, log_weights, means, covs })
    }

    /// Mixture with weights `1/K`.
    pub fn equal_weights(
        means: Vec<Vec<T>>,
        covs: Vec<SpdMatrix<T>>,
    ) -> Result<Self, DistributionError> {
        let k = T::from_usize_lossy(means.len().max(1));
        Self::new(vec![T::one() / k; means.len()], means, covs)
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<T>] {
        &self.means
    }

    pub fn covs(&self) -> &[SpdMatrix<T>] {
        &self.covs
    }

    /// `Σ_k w_k (Λ_k + ν_k ν_kᵀ) − μ μᵀ`.
    pub fn covariance(&self) -> Result<SpdMatrix<T>, LinalgError> {
        let d = self.dim();
        let mu = mixture_mean(self);
        let mut m = Matrix::zeros(d, d);
        for ((&w, nu), cov) in self.weights.iter().zip(&self.means).zip(&self.covs) {
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += w * (cov.entries()[(i, j)] + nu[i] * nu[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] -= mu[i] * mu[j];
            }
        }
        SpdMatrix::new(m)
    }
}

/// `log Σ_k w_k N(x; ν_k, Λ_k)` via log-sum-exp.
pub fn mixture_log_pdf<T: Real>(x: &[T], spec: &GaussianMixtureSpec<T>) -> T {
    let terms: Vec<T> = spec
        .log_weights
        .iter()
        .zip(spec.means.iter().zip(&spec.covs))
        .map(|(&lw, (mu, cov))| lw + mvn_log_pdf(x, mu, cov).unwrap_or_else(|_| T::neg_infinity()))
        .collect();
    log_sum_exp(&terms)
}

/// `Σ_k w_k ν_k`.
pub fn mixture_mean<T: Real>(spec: &GaussianMixtureSpec<T>) -> Vec<T> {
    let mut out = vec![T::zero(); spec.dim()];
    for (&w, nu) in spec.weights.iter().zip(&spec.means) {
        for (o, &v) in out.iter_mut().zip(nu) {
            *o += w * v;
        }
    }
    out
}

/// Gaussian target `e^{log_scale} · N(x; mean, cov)`.
#[derive(Debug, Clone)]
pub struct GaussianTarget<T> {
    log_scale: T,
    truth: GroundTruth<T>,
}

impl<T: Real> GaussianTarget<T> {
    /// Normalized Gaussian (`Z = 1`).
    pub fn new(mean: Vec<T>, cov: SpdMatrix<T>) -> Self {
        Self::with_log_scale(mean, cov, T::zero())
    }

    /// Gaussian density multiplied by `exp(log_scale)`, so `Z = exp(log_scale)`.
    pub fn with_log_scale(mean: Vec<T>, cov: SpdMatrix<T>, log_scale: T) -> Self {
        assert_eq!(mean.len(), cov.dim(), "mean/covariance dimension");
        GaussianTarget { log_scale, truth: GroundTruth { mean, cov, z: log_scale.exp() } }
    }

    pub fn mean(&self) -> &[T] {
        &self.truth.mean
    }

    pub fn cov(&self) -> &SpdMatrix<T> {
        &self.truth.cov
    }
}

impl<T: Real> TargetModel<T> for GaussianTarget<T> {
    fn dim(&self) -> usize {
        self.truth.mean.len()
    }

    fn log_density(&self, x: &[T]) -> T {
        // `mvn_log_pdf` only fails on dimension mismatch
        self.log_scale
            + mvn_log_pdf(x, &self.truth.mean, &self.truth.cov).unwrap_or_else(|_| T::neg_infinity())
    }

    fn truth(&self) -> Option<&GroundTruth<T>> {
        Some(&self.truth)
    }

    fn as_gaussian(&self) -> Option<(&[T], &SpdMatrix<T>)> {
        Some((&self.truth.mean, &self.truth.cov))
    }
}

/// Normalized Gaussian-mixture target.
#[derive(Debug, Clone)]
pub struct MixtureTarget<T> {
    spec: GaussianMixtureSpec<T>,
    truth: GroundTruth<T>,
}

impl<T: Real> MixtureTarget<T> {
    pub fn new(spec: GaussianMixtureSpec<T>) -> Result<Self, LinalgError> {
        let truth = GroundTruth { mean: mixture_mean(&spec), cov: spec.covariance()?, z: T::one() };
        Ok(MixtureTarget { spec, truth })
    }

    pub fn spec(&self) -> &GaussianMixtureSpec<T> {
        &self.spec
    }
}

impl<T: Real> TargetModel<T> for MixtureTarget<T> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn log_density(&self, x: &[T]) -> T {
        mixture_log_pdf(x, &self.spec)
    }

    fn truth(&self) -> Option<&GroundTruth<T>> {
        Some(&self.truth)
    }
}

/// Target backed by a closure, for models without ground truth.
pub struct FnTarget<F> {
    dim: usize,
    log_density: F,
}

impl<F> FnTarget<F> {
    pub fn new(dim: usize, log_density: F) -> Self {
        FnTarget { dim, log_density }
    }
}

impl<T: Real, F> TargetModel<T> for FnTarget<F>
where
    F: Fn(&[T]) -> T + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[T]) -> T {
        (self.log_density)(x)
    }
}

/// Dimension of both experiment targets.
pub const EXAMPLE_DIM: usize = 10;

/// Wishart draw with `dof = d + 2` and scale `I / dof`, so `E[W] = I`.
pub fn experiment_covariance<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
) -> Result<SpdMatrix<T>, DistributionError> {
    let dof = dim + 2;
    let scale = SpdMatrix::scaled_identity(dim, T::one() / T::from_usize_lossy(dof));
    wishart_sample(rng, &scale, dof)
}

/// Unimodal Gaussian with mean `10·1` and a Wishart-drawn covariance.
pub fn make_gaussian_target<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
) -> Result<GaussianTarget<T>, DistributionError> {
    let cov = experiment_covariance(rng, dim)?;
    Ok(GaussianTarget::new(vec![T::lit(10.0); dim], cov))
}

/// The 10-dimensional unimodal Gaussian target of the first experiment.
pub fn make_example1_target<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
) -> Result<GaussianTarget<T>, DistributionError> {
    make_gaussian_target(rng, EXAMPLE_DIM)
}

/// Means of the three-component mixture used by the second experiment.
pub fn example2_means<T: Real>() -> Vec<Vec<T>> {
    let third = [1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 4.0, 3.0, 2.0, 1.0];
    vec![
        vec![T::lit(6.0); EXAMPLE_DIM],
        vec![T::lit(-5.0); EXAMPLE_DIM],
        third.iter().map(|&v| T::lit(v)).collect(),
    ]
}

/// Equal-weight three-component 10-dimensional mixture with
/// Wishart-drawn component covariances.
pub fn make_example2_target<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
) -> Result<MixtureTarget<T>, DistributionError> {
    let covs = (0..3)
        .map(|_| experiment_covariance(rng, EXAMPLE_DIM))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = GaussianMixtureSpec::equal_weights(example2_means(), covs)?;
    Ok(MixtureTarget::new(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn diag(v: &[f64]) -> SpdMatrix<f64> {
        SpdMatrix::from_diagonal(v)
    }

    #[test]
    fn mvn_log_pdf_cases() {
        let v = mvn_log_pdf(&[0.0], &[0.0], &diag(&[1.0])).unwrap();
        assert!((v + 0.5 * TAU.ln()).abs() < 1e-15);
        assert!((v + 0.91894).abs() < 1e-5);
        let v = mvn_log_pdf(&[3.0, 3.0], &[3.0, 3.0], &SpdMatrix::identity(2)).unwrap();
        assert!((v + TAU.ln()).abs() < 1e-15);
        assert!((v + 1.83788).abs() < 1e-5);
        let v = mvn_log_pdf(&[1.0, 0.0], &[0.0, 0.0], &diag(&[4.0, 9.0])).unwrap();
        let expected = -TAU.ln() - 0.5 * 36f64.ln() - 1.0 / 8.0;
        assert!((v - expected).abs() < 1e-14);
        assert!(mvn_log_pdf(&[1.0], &[0.0, 0.0], &diag(&[4.0, 9.0])).is_err());
    }

    #[test]
    fn mvn_density_integrates_to_one() {
        let sigma = 1.7_f64;
        let cov = diag(&[sigma * sigma]);
        let (lo, hi) = (-10.0 * sigma, 10.0 * sigma);
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        // composite Simpson
        let f = |x: f64| mvn_log_pdf(&[x], &[0.0], &cov).unwrap().exp();
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let x = lo + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mvn_sample_degenerate_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cov = SpdMatrix::scaled_identity(3, 1e-12);
        let mu = [1.0_f64, -2.0, 5.0];
        let s = mvn_sample(&mut rng, &mu, &cov, 5).unwrap();
        for row in s.row_iter() {
            for (a, b) in row.iter().zip(&mu) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn mvn_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let s = mvn_sample(&mut rng, &[0.0, 0.0], &SpdMatrix::identity(2), n).unwrap();
        for j in 0..2 {
            let m: f64 = s.row_iter().map(|r| r[j]).sum::<f64>() / n as f64;
            assert!(m.abs() < 0.02, "mean {m}");
        }

        let target: SpdMatrix<f64> = SpdMatrix::new(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]])).unwrap();
        let s = mvn_sample(&mut rng, &[0.0, 0.0], &target, n).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let c: f64 = s.row_iter().map(|r| r[i] * r[j]).sum::<f64>() / n as f64;
                assert!((c - target.entries()[(i, j)]).abs() < 0.05, "cov[{i},{j}] = {c}");
            }
        }
    }

    #[test]
    fn mvn_sample_is_reproducible() {
        let cov = SpdMatrix::new(Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]])).unwrap();
        let a = mvn_sample(&mut ChaCha8Rng::seed_from_u64(5), &[1.0, 2.0], &cov, 50).unwrap();
        let b = mvn_sample(&mut ChaCha8Rng::seed_from_u64(5), &[1.0, 2.0], &cov, 50).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn mixture_single_component_matches_gaussian() {
        let cov: SpdMatrix<f64> = SpdMatrix::new(Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]])).unwrap();
        let spec = GaussianMixtureSpec::new(vec![1.0], vec![vec![1.0, -1.0]], vec![cov.clone()]).unwrap();
        let x = [0.3, 0.7];
        let a = mixture_log_pdf(&x, &spec);
        let b = mvn_log_pdf(&x, &[1.0, -1.0], &cov).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert_eq!(mixture_mean(&spec), vec![1.0, -1.0]);
    }

    #[test]
    fn mixture_symmetric_components() {
        let a = 1.5_f64;
        let spec = GaussianMixtureSpec::equal_weights(
            vec![vec![a, a], vec![-a, -a]],
            vec![SpdMatrix::identity(2), SpdMatrix::identity(2)],
        )
        .unwrap();
        let common = mvn_log_pdf(&[0.0, 0.0], &[a, a], &SpdMatrix::identity(2)).unwrap();
        assert!((mixture_log_pdf(&[0.0, 0.0], &spec) - common).abs() < 1e-14);
        assert_eq!(mixture_mean(&spec), vec![0.0, 0.0]);
    }

    #[test]
    fn example2_target_matches_brute_force_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let target = make_example2_target::<f64, _>(&mut rng).unwrap();
        let spec = target.spec();
        let x = vec![6.0; 10];
        let direct: f64 = (0..3)
            .map(|k| {
                let cov = &spec.covs()[k];
                let m = cov.mahalanobis_sq(&x, &spec.means()[k]).unwrap();
                let norm = (2.0 * PI).powf(-5.0) * (-0.5 * cov.log_det()).exp();
                norm * (-0.5 * m).exp() / 3.0
            })
            .sum();
        assert!((target.log_density(&x) - direct.ln()).abs() < 1e-10);
        for (k, (nu, cov)) in spec.means().iter().zip(spec.covs()).enumerate() {
            let lower = spec.weights()[k].ln() + mvn_log_pdf(&x, nu, cov).unwrap();
            assert!(target.log_density(&x) >= lower - 1e-12);
        }
    }

    #[test]
    fn example_truth_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t1 = make_example1_target::<f64, _>(&mut rng).unwrap();
        assert_eq!(t1.truth().unwrap().mean, vec![10.0; 10]);
        assert!(t1.log_density(&[10.0; 10]).is_finite());

        let t2 = make_example2_target::<f64, _>(&mut rng).unwrap();
        let expected = [2.0 / 3.0, 1.0, 4.0 / 3.0, 5.0 / 3.0, 2.0, 2.0, 5.0 / 3.0, 4.0 / 3.0, 1.0, 2.0 / 3.0];
        for (a, b) in t2.truth().unwrap().mean.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(t2.log_density(&t2.truth().unwrap().mean).is_finite());
        assert!(t2.as_gaussian().is_none());
    }

    #[test]
    fn wishart_mean_and_validity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let scale = SpdMatrix::<f64>::identity(3);
        let draws = 10_000;
        let mut acc = Matrix::<f64>::zeros(3, 3);
        for _ in 0..draws {
            let w = wishart_sample(&mut rng, &scale, 50).unwrap();
            assert!(w.entries().max_asymmetry() == 0.0);
            for i in 0..3 {
                for j in 0..3 {
                    acc[(i, j)] += w.entries()[(i, j)] / draws as f64;
                }
            }
        }
        for i in 0..3 {
            assert!((acc[(i, i)] - 50.0).abs() < 0.05 * 50.0);
            for j in 0..3 {
                if i != j {
                    assert!(acc[(i, j)].abs() < 0.05 * 50.0);
                }
            }
        }
        // boundary dof
        for _ in 0..100 {
            let w = wishart_sample(&mut rng, &SpdMatrix::<f64>::identity(2), 2).unwrap();
            assert!(w.min_eigenvalue() > 0.0);
        }
        assert!(matches!(
            wishart_sample(&mut rng, &SpdMatrix::<f64>::identity(3), 2),
            Err(DistributionError::InvalidDof { dof: 2, dim: 3 })
        ));
    }

    #[test]
    fn mixture_spec_validation() {
        let c = || SpdMatrix::<f64>::identity(2);
        assert!(matches!(
            GaussianMixtureSpec::new(vec![0.5, 0.6], vec![vec![0.0; 2]; 2], vec![c(), c()]),
            Err(DistributionError::InvalidWeights { .. })
        ));
        assert!(matches!(
            GaussianMixtureSpec::new(vec![0.5, 0.5], vec![vec![0.0; 2], vec![0.0; 3]], vec![c(), c()]),
            Err(DistributionError::ComponentDimension { index: 1, .. })
        ));
        assert!(matches!(
            GaussianMixtureSpec::<f64>::new(vec![], vec![], vec![]),
            Err(DistributionError::EmptyMixture)
        ));
    }

    #[test]
    fn mixture_covariance_of_separated_modes() {
        let spec = GaussianMixtureSpec::equal_weights(
            vec![vec![1.0], vec![-1.0]],
            vec![diag(&[0.5]), diag(&[0.5])],
        )
        .unwrap();
        let t = MixtureTarget::new(spec).unwrap();
        assert!((t.truth().unwrap().cov.entries()[(0, 0)] - 1.5).abs() < 1e-15);
    }
}
