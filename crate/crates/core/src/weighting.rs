//! Importance weights, kept in the log domain throughout.
//!
//! Raw weights `π(x)/q(x)` at moderate dimension routinely overflow or
//! underflow doubles, so nothing here materializes them. Normalization is a
//! max-shifted softmax, and both nonlinear transforms (clipping and
//! tempering) act on log-weights directly.

use thiserror::Error;

use crate::adaptation::ProposalComponent;
use crate::distributions::{mvn_log_pdf, TargetModel};
use crate::linalg::Matrix;
use crate::scalar::{compensated_sum, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("every importance weight is zero")]
    AllWeightsZero,
    #[error("tempering cannot reach ESS {n_t}: only {finite} weights are nonzero")]
    GammaUnreachable { finite: usize, n_t: usize },
}

/// Upper end of the doubling phase in [`find_gamma`].
pub const GAMMA_CAP: f64 = 1152921504606846976.0; // 2^60

const MAX_BISECTIONS: usize = 100;

/// Samples from one mixand at one iteration together with their weights.
#[derive(Debug, Clone)]
pub struct WeightedBatch<T> {
    pub samples: Matrix<T>,
    /// Raw `log π(x) − log q(x)`; may contain `-∞`.
    pub log_weights: Vec<T>,
    /// Softmax of `log_weights`, or uniform when the batch is degenerate.
    pub norm_weights: Vec<T>,
    pub proposal_index: usize,
    pub iteration: usize,
    /// Every raw weight was zero and uniform weights were substituted.
    pub degenerate: bool,
}

impl<T: Real> WeightedBatch<T> {
    pub fn new(samples: Matrix<T>, log_weights: Vec<T>, proposal_index: usize, iteration: usize) -> Self {
        let (norm_weights, degenerate) = match normalize(&log_weights) {
            Ok(w) => (w, false),
            Err(_) => (uniform(log_weights.len()), true),
        };
        WeightedBatch { samples, log_weights, norm_weights, proposal_index, iteration, degenerate }
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn ess(&self) -> T {
        ess(&self.norm_weights)
    }
}

fn uniform<T: Real>(n: usize) -> Vec<T> {
    vec![T::one() / T::from_usize_lossy(n.max(1)); n]
}

/// `log π(x⁽ⁿ⁾) − log q(x⁽ⁿ⁾; μ, Σ)` for every row of `samples`.
pub fn compute_log_weights<T: Real, M: TargetModel<T> + ?Sized>(
    samples: &Matrix<T>,
    target: &M,
    proposal: &ProposalComponent<T>,
) -> Vec<T> {
    samples
        .row_iter()
        .map(|x| {
            let log_pi = target.log_density(x);
            let log_q = mvn_log_pdf(x, &proposal.mean, &proposal.cov).unwrap_or_else(|_| T::nan());
            let lw = log_pi - log_q;
            if lw.is_nan() {
                T::neg_infinity()
            } else {
                lw
            }
        })
        .collect()
}

/// Locally normalized weights: softmax of `log_weights`.
pub fn normalize<T: Real>(log_weights: &[T]) -> Result<Vec<T>, WeightError> {
    let max = log_weights.iter().copied().filter(|v| !v.is_nan()).fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Err(WeightError::AllWeightsZero);
    }
    if max == T::infinity() {
        // infinite weights share the mass
        let inf: Vec<bool> = log_weights.iter().map(|&v| v == T::infinity()).collect();
        let k = T::from_usize_lossy(inf.iter().filter(|&&b| b).count());
        return Ok(inf.iter().map(|&b| if b { T::one() / k } else { T::zero() }).collect());
    }
    let shifted: Vec<T> = log_weights
        .iter()
        .map(|&v| if v.is_nan() { T::zero() } else { (v - max).exp() })
        .collect();
    let total = compensated_sum(shifted.iter().copied());
    Ok(shifted.into_iter().map(|v| v / total).collect())
}

/// Effective sample size `1 / Σ w̄²` of normalized weights.
///
/// Evaluated as `(Σ u)² / Σ u²` with `u = w̄ / max w̄`, which equals the
/// definition when `Σ w̄ = 1` and keeps tied maximal weights exactly at 1.
pub fn ess<T: Real>(norm_weights: &[T]) -> T {
    let max = norm_weights.iter().copied().fold(T::zero(), T::max);
    if max <= T::zero() {
        return T::zero();
    }
    let first = compensated_sum(norm_weights.iter().map(|&w| w / max));
    let second = compensated_sum(norm_weights.iter().map(|&w| (w / max) * (w / max)));
    first * first / second
}

/// Caps every log-weight at the `n_t`-th largest one.
///
/// Ties at the threshold survive unchanged. `n_t` is clamped into `[1, N]`.
pub fn clip_weights<T: Real>(log_weights: &[T], n_t: usize) -> Vec<T> {
    if log_weights.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<T> =
        log_weights.iter().map(|&v| if v.is_nan() { T::neg_infinity() } else { v }).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let threshold = sorted[n_t.clamp(1, sorted.len()) - 1];
    log_weights.iter().map(|&v| if v > threshold { threshold } else { v }).collect()
}

/// Raises raw weights to the power `1/gamma`, i.e. divides log-weights by `gamma`.
pub fn temper_weights<T: Real>(log_weights: &[T], gamma: T) -> Vec<T> {
    log_weights.iter().map(|&v| v / gamma).collect()
}

/// ESS after tempering with `gamma` and renormalizing; `0` for an
/// all-zero batch.
pub fn tempered_ess<T: Real>(log_weights: &[T], gamma: T) -> T {
    normalize(&temper_weights(log_weights, gamma)).map(|w| ess(&w)).unwrap_or_else(|_| T::zero())
}

/// Tempering exponent whose transformed weights have ESS close to `n_t`.
///
/// Returns 1 when the untransformed ESS already reaches `n_t`. Otherwise
/// `gamma` doubles until the ESS reaches `n_t`, then the last bracket is
/// bisected until `|ESS − n_t| ≤ eps`. The first examined `gamma` meeting
/// the tolerance is returned.
pub fn find_gamma<T: Real>(log_weights: &[T], n_t: usize, eps: T) -> Result<T, WeightError> {
    let target = T::from_usize_lossy(n_t);
    let within = |e: T| (e - target).abs() <= eps;

    if tempered_ess(log_weights, T::one()) >= target {
        return Ok(T::one());
    }
    let finite = log_weights.iter().filter(|v| v.is_finite()).count();
    if finite < n_t {
        return Err(WeightError::GammaUnreachable { finite, n_t });
    }

    let cap = T::lit(GAMMA_CAP);
    let two = T::lit(2.0);
    let mut hi = T::one();
    let mut hi_ess;
    loop {
        hi *= two;
        hi_ess = tempered_ess(log_weights, hi);
        if within(hi_ess) || hi >= cap {
            return Ok(hi);
        }
        if hi_ess >= target {
            break;
        }
    }

    let mut lo = hi / two;
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo + hi) / two;
        let e = tempered_ess(log_weights, mid);
        if within(e) {
            return Ok(mid);
        }
        if e > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpdMatrix;
    use crate::distributions::{FnTarget, GaussianTarget};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn ln(v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| x.ln()).collect()
    }

    #[test]
    fn log_weights_identical_distributions() {
        let cov = SpdMatrix::new(Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]])).unwrap();
        let prop = ProposalComponent::new(0, vec![1.0, 2.0], cov.clone());
        let target = GaussianTarget::new(vec![1.0, 2.0], cov.clone());
        let samples = Matrix::from_rows(&[[0.0, 0.0], [1.0, 2.0], [5.0, -3.0]]);
        assert_eq!(compute_log_weights(&samples, &target, &prop), vec![0.0; 3]);

        let doubled = GaussianTarget::with_log_scale(vec![1.0, 2.0], cov, 2f64.ln());
        let lw = compute_log_weights(&samples, &doubled, &prop);
        assert!(close(&lw, &[2f64.ln(); 3], 1e-14));
    }

    #[test]
    fn log_weights_closed_form_ratio() {
        // N(0,1) target against N(0,2): log(√2) − x²/2 + x²/4
        let target = FnTarget::new(1, |x: &[f64]| -0.5 * x[0] * x[0] - 0.5 * std::f64::consts::TAU.ln());
        let prop = ProposalComponent::new(0, vec![0.0], SpdMatrix::from_diagonal(&[2.0]));
        let xs = [-3.0, -0.5, 0.0, 1.25, 4.0];
        let samples = Matrix::from_row_major(5, 1, xs.to_vec());
        let lw = compute_log_weights(&samples, &target, &prop);
        for (w, x) in lw.iter().zip(xs) {
            let expected = 0.5 * 2f64.ln() - x * x / 4.0;
            assert!((w - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(normalize(&[0.0; 4]).unwrap(), vec![0.25; 4]);
        assert!(close(&normalize(&[3f64.ln(), 0.0]).unwrap(), &[0.75, 0.25], 1e-15));
        assert!(close(&normalize(&[1000.0, 1000.0 + 2f64.ln()]).unwrap(), &[1.0 / 3.0, 2.0 / 3.0], 1e-12));
        assert_eq!(normalize(&[f64::NEG_INFINITY, 0.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(normalize(&[f64::NEG_INFINITY; 3]), Err(WeightError::AllWeightsZero));
    }

    #[test]
    fn degenerate_batch_gets_uniform_weights() {
        let b = WeightedBatch::new(Matrix::<f64>::zeros(4, 2), vec![f64::NEG_INFINITY; 4], 0, 1);
        assert!(b.degenerate);
        assert_eq!(b.norm_weights, vec![0.25; 4]);
    }

    #[test]
    fn ess_cases() {
        assert_eq!(ess(&[0.25; 4]), 4.0);
        assert_eq!(ess(&[1.0, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(ess(&[0.5, 0.5, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn clip_cases() {
        let raw = ln(&[10.0, 4.0, 2.0, 1.0]);
        let clipped = clip_weights(&raw, 2);
        assert!(close(&clipped, &ln(&[4.0, 4.0, 2.0, 1.0]), 1e-15));
        let e = ess(&normalize(&clipped).unwrap());
        assert!((e - 121.0 / 37.0).abs() < 1e-12);
        assert!(e >= 2.0);

        let flat = vec![0.7; 6];
        assert_eq!(clip_weights(&flat, 3), flat);
    }

    #[test]
    fn clip_ties_survive_at_threshold() {
        let raw = ln(&[5.0, 3.0, 3.0, 3.0, 1.0]);
        let clipped = clip_weights(&raw, 2);
        assert_eq!(clipped, ln(&[3.0, 3.0, 3.0, 3.0, 1.0]));
    }

    #[test]
    fn temper_cases() {
        let lw = vec![2.0, 0.0, f64::NEG_INFINITY];
        assert_eq!(temper_weights(&lw, 1.0), lw);
        assert_eq!(temper_weights(&lw, 2.0), vec![1.0, 0.0, f64::NEG_INFINITY]);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lw: Vec<f64> = (0..50).map(|_| rng.random_range(-30.0..30.0)).collect();
        let w = normalize(&temper_weights(&lw, 1e6)).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 50.0).abs() < 1e-5));
    }

    #[test]
    fn find_gamma_uniform_is_one() {
        assert_eq!(find_gamma(&[0.0; 10], 5, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn find_gamma_two_point() {
        let lw = [0.0, -(100f64.ln())];
        let g = find_gamma(&lw, 2, 0.01).unwrap();
        assert!(g > 1.0);
        let e = tempered_ess(&lw, g);
        assert!((e - 2.0).abs() <= 0.01, "ess {e} at gamma {g}");
    }

    #[test]
    fn find_gamma_hits_tolerance() {
        let lw = [4.0_f64, 0.0, 0.0, 0.0];
        let g = find_gamma(&lw, 3, 0.05).unwrap();
        let e = tempered_ess(&lw, g);
        assert!((e - 3.0).abs() <= 0.05, "ess {e} at gamma {g}");
    }

    #[test]
    fn find_gamma_unreachable() {
        let lw = [0.0, f64::NEG_INFINITY, f64::NEG_INFINITY, -3.0];
        assert_eq!(find_gamma(&lw, 3, 0.1), Err(WeightError::GammaUnreachable { finite: 2, n_t: 3 }));
    }
}
