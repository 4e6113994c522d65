//! Scalar abstraction shared by every numerical kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar usable by the inference and training kernels.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every value used in this crate is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Stand-in for negative infinity inside score tables, keeping arithmetic total.
pub const NEG_SENTINEL: f64 = -1e30;

/// Anything at or below this is treated as a forbidden cell.
pub const FORBIDDEN_THRESHOLD: f64 = -1e29;

#[inline]
pub fn neg_sentinel<S: Real>() -> S {
    S::lit(NEG_SENTINEL)
}

#[inline]
pub fn is_forbidden<S: Real>(x: S) -> bool {
    x <= S::lit(FORBIDDEN_THRESHOLD)
}

/// Numerically stable `log(sum(exp(x)))`. Returns `-inf` for an empty input.
pub fn log_sum_exp<S: Real>(xs: &[S]) -> S {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if !max.is_finite() {
        return max;
    }
    let sum: S = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Streaming two-argument log-add.
#[inline]
pub fn log_add<S: Real>(a: S, b: S) -> S {
    if a == S::neg_infinity() {
        return b;
    }
    if b == S::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Index of the maximal element; ties resolve to the lowest index.
pub fn argmax<S: Real>(xs: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn dot_sparse<S: Real>(weights: &[S], offset: usize, features: &crate::features::FeatureVector) -> S {
    let mut acc = S::zero();
    for &(idx, v) in features.entries() {
        acc += weights[offset + idx as usize] * S::lit(v);
    }
    acc
}

pub fn add_sparse<S: Real>(grad: &mut [S], offset: usize, features: &crate::features::FeatureVector, scale: S) {
    for &(idx, v) in features.entries() {
        grad[offset + idx as usize] += scale * S::lit(v);
    }
}
