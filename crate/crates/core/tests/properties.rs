use cais_core::adaptation::{weighted_covariance, weighted_mean};
use cais_core::diagnostics::{kl_gaussians, mse_of_mean, self_normalized_estimate};
use cais_core::linalg::{repair_to_spd, Matrix, SpdMatrix};
use cais_core::weighting::{clip_weights, ess, find_gamma, normalize, temper_weights, tempered_ess};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};

fn heavy_tailed(seed: u64, n: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cauchy = Cauchy::new(0.0, scale).unwrap();
    (0..n).map(|_| cauchy.sample(&mut rng)).collect()
}

fn random_spd(seed: u64, d: usize) -> SpdMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..d * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let a = Matrix::from_row_major(d, d, a);
    let m = a.matmul(&a.transpose()).unwrap().add_diagonal(0.1);
    SpdMatrix::new(m).unwrap()
}

fn weights_strategy() -> impl Strategy<Value = Vec<f64>> {
    (20usize..=500, any::<u64>(), 0.1f64..50.0).prop_map(|(n, seed, scale)| heavy_tailed(seed, n, scale))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ess_lies_in_one_to_n(lw in weights_strategy()) {
        let e = ess(&normalize(&lw).unwrap());
        let n = lw.len() as f64;
        prop_assert!(e >= 1.0 - 1e-9 && e <= n * (1.0 + 1e-12));
    }

    #[test]
    fn clipping_reaches_threshold(lw in weights_strategy(), frac in 0.01f64..1.0) {
        let n_t = ((lw.len() as f64 * frac).ceil() as usize).clamp(1, lw.len());
        let e = ess(&normalize(&clip_weights(&lw, n_t)).unwrap());
        prop_assert!(e >= n_t as f64, "ess {e} below n_t {n_t}");
    }

    #[test]
    fn clipping_preserves_order_below_level(lw in weights_strategy(), frac in 0.01f64..1.0) {
        let n_t = ((lw.len() as f64 * frac).ceil() as usize).clamp(1, lw.len());
        let clipped = clip_weights(&lw, n_t);
        for i in 0..lw.len() {
            prop_assert!(clipped[i] <= lw[i]);
            for j in 0..lw.len() {
                if lw[i] < lw[j] {
                    prop_assert!(clipped[i] <= clipped[j]);
                }
            }
        }
    }

    #[test]
    fn tempered_ess_is_monotone(lw in weights_strategy()) {
        let grid: Vec<f64> = (0..20).map(|k| 2f64.powf(k as f64 * 0.75)).collect();
        let values: Vec<f64> = grid.iter().map(|&g| tempered_ess(&lw, g)).collect();
        for pair in values.windows(2) {
            prop_assert!(pair[1] >= pair[0] * (1.0 - 1e-12), "{} then {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn tempering_is_strictly_order_preserving(lw in weights_strategy(), gamma in 1.0f64..1e6) {
        let t = temper_weights(&lw, gamma);
        for i in 0..lw.len() {
            for j in 0..lw.len() {
                if lw[i] < lw[j] {
                    prop_assert!(t[i] < t[j]);
                }
            }
        }
    }

    #[test]
    fn unit_gamma_is_identity(lw in weights_strategy()) {
        prop_assert_eq!(normalize(&temper_weights(&lw, 1.0)).unwrap(), normalize(&lw).unwrap());
    }

    #[test]
    fn find_gamma_hits_target(lw in weights_strategy(), frac in 0.02f64..0.9) {
        let n = lw.len();
        let n_t = ((n as f64 * frac) as usize).clamp(1, n - 1);
        let eps = (0.01 * n as f64).max(1.0);
        let gamma = find_gamma(&lw, n_t, eps).unwrap();
        let e = tempered_ess(&lw, gamma);
        if gamma == 1.0 {
            prop_assert!(e >= n_t as f64 - eps);
        } else {
            prop_assert!((e - n_t as f64).abs() <= eps, "gamma {gamma} ess {e} n_t {n_t}");
        }
    }

    #[test]
    fn shift_invariance(lw in weights_strategy(), sign in prop::bool::ANY, frac in 0.05f64..0.9) {
        let shift = if sign { 500.0 } else { -500.0 };
        let moved: Vec<f64> = lw.iter().map(|v| v + shift).collect();
        let a = normalize(&lw).unwrap();
        let b = normalize(&moved).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let n_t = ((lw.len() as f64 * frac) as usize).max(1);
        let ca = normalize(&clip_weights(&lw, n_t)).unwrap();
        let cb = normalize(&clip_weights(&moved, n_t)).unwrap();
        for (x, y) in ca.iter().zip(&cb) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn estimate_ignores_weight_scale(seed in any::<u64>(), shift in -300.0f64..300.0) {
        let lw = heavy_tailed(seed, 50, 2.0);
        let xs: Vec<Vec<f64>> = lw.iter().enumerate().map(|(i, v)| vec![i as f64, v.sin()]).collect();
        let a = self_normalized_estimate(xs.iter().map(|x| &x[..]).zip(lw.iter().copied()), |x| x.to_vec()).unwrap();
        let b = self_normalized_estimate(
            xs.iter().map(|x| &x[..]).zip(lw.iter().map(|v| v + shift)),
            |x| x.to_vec(),
        )
        .unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn kl_nonnegative_and_zero_on_identity(s0 in any::<u64>(), s1 in any::<u64>(), d in 1usize..8) {
        let c0 = random_spd(s0, d);
        let c1 = random_spd(s1, d);
        let mu0 = heavy_tailed(s0, d, 1.0);
        let mu1 = heavy_tailed(s1, d, 1.0);
        prop_assert!(kl_gaussians(&mu0, &c0, &mu1, &c1).unwrap() >= 0.0);
        prop_assert!(kl_gaussians(&mu0, &c0, &mu0, &c0).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn mse_is_permutation_invariant(seed in any::<u64>(), runs in 1usize..10) {
        let est: Vec<Vec<f64>> = (0..runs).map(|r| heavy_tailed(seed.wrapping_add(r as u64), 4, 1.0)).collect();
        let truth = vec![0.5; 4];
        let mut rev = est.clone();
        rev.reverse();
        let a = mse_of_mean(&est, &truth);
        let b = mse_of_mean(&rev, &truth);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn weighted_covariance_is_psd_and_symmetric(seed in any::<u64>(), n in 2usize..40, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = Matrix::from_row_major(n, d, xs);
        let w = normalize(&heavy_tailed(seed, n, 3.0)).unwrap();
        let mu = weighted_mean(&x, &w);
        let cov = weighted_covariance(&x, &w, &mu);
        prop_assert_eq!(cov.max_asymmetry(), 0.0);
        let repaired = repair_to_spd(&cov, 1e-9).unwrap();
        let floor = -1e-12 * (1.0 + cov.max_abs());
        prop_assert!(repaired.matrix.min_eigenvalue() > floor);
    }
}

