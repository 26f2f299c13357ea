//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All tables, beliefs and reward weights are generic over `F: Scalar`, which
//! is implemented for `f32` and `f64`. The pipeline and CLI use `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; every literal used in the crate is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must convert to scalar")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize must convert to scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product of two equally sized slices.
#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Euclidean norm.
#[inline]
pub fn norm<F: Scalar>(a: &[F]) -> F {
    a.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Numerically stable `log(sum(exp(x)))`. Returns `-inf` for an all `-inf` input.
pub fn log_sum_exp<F: Scalar>(xs: &[F]) -> F {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    let total: F = xs.iter().map(|&x| (x - max).exp()).sum();
    max + total.ln()
}

/// Index of the maximal element, lowest index on ties.
pub fn argmax_lowest<F: Scalar>(xs: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.3_f64, -1.2, 2.5];
        let direct = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 2]), f64::NEG_INFINITY);
        let big = [1000.0_f32, 1000.0];
        assert!((log_sum_exp(&big) - (1000.0 + 2.0_f32.ln())).abs() < 1e-3);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_lowest(&[1.0_f64, 3.0, 3.0]), 1);
        assert_eq!(argmax_lowest(&[2.0_f32, 2.0]), 0);
    }
}
