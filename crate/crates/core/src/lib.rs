//! Covariance adaptive importance sampling (CAIS).
//!
//! A population of Gaussian proposals is adapted over iterations. Means
//! follow the standard self-normalized importance weights; covariances are
//! updated from the same weights only while the per-proposal effective
//! sample size stays above a threshold `n_t`, and otherwise from weights
//! flattened by clipping or tempering so every update stays positive
//! definite.
//!
//! The numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which is what the benchmark
//! harness uses.
//!
//! ```
//! use cais_core::{
//!     adaptation::AdaptationConfig, distributions::GaussianTarget, linalg::SpdMatrix,
//!     rng::RngStreams, samplers::{cais_run, InitScheme, RunPlan},
//! };
//!
//! let target = GaussianTarget::new(vec![1.0, -1.0], SpdMatrix::identity(2));
//! let init = InitScheme::Fixed { mean: vec![0.0, 0.0], cov: SpdMatrix::scaled_identity(2, 4.0) };
//! let plan = RunPlan { components: 1, samples_per_component: 200, iterations: 10 };
//! let cfg = AdaptationConfig::new(20);
//! let out = cais_run(&target, &init, &plan, &cfg, &RngStreams::new(7, 0)).unwrap();
//! assert_eq!(out.pair_count(), 10 * 200);
//! ```

pub mod adaptation;
pub mod diagnostics;
pub mod distributions;
pub mod linalg;
pub mod rng;
pub mod samplers;
pub mod scalar;
pub mod weighting;

pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type SpdMatrix = linalg::SpdMatrix<f64>;
pub type ProposalComponent = adaptation::ProposalComponent<f64>;
pub type AdaptationConfig = adaptation::AdaptationConfig<f64>;
pub type WeightedBatch = weighting::WeightedBatch<f64>;
pub type GaussianTarget = distributions::GaussianTarget<f64>;
pub type MixtureTarget = distributions::MixtureTarget<f64>;
pub type GaussianMixtureSpec = distributions::GaussianMixtureSpec<f64>;
pub type SamplerOutput = samplers::SamplerOutput<f64>;
pub type InitScheme = samplers::InitScheme<f64>;
