//! Scalar abstraction shared by every numeric kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Floating point scalar the samplers are generic over: `f32` or `f64`.
///
/// Random variate generation is routed through the trait so generic code
/// does not have to repeat `StandardNormal: Distribution<T>` bounds.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the value is unrepresentable,
    /// which cannot happen for `f32`/`f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draws from a chi-squared distribution with `dof` degrees of freedom.
    fn chi_squared<R: Rng + ?Sized>(rng: &mut R, dof: Self) -> Self;

    /// Uniform draw on `[lo, hi)`.
    fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn chi_squared<R: Rng + ?Sized>(rng: &mut R, dof: Self) -> Self {
                ChiSquared::new(dof)
                    .expect("chi-squared degrees of freedom must be positive")
                    .sample(rng)
            }

            fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
                rng.random_range(lo..hi)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Neumaier-compensated summation.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `ln Σ exp(v)` with a max shift. Returns `-∞` for an empty slice or when
/// every entry is `-∞`.
pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return T::neg_infinity();
    }
    if max == T::infinity() {
        return T::infinity();
    }
    max + compensated_sum(values.iter().map(|&v| (v - max).exp())).ln()
}
