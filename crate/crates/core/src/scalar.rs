//! Scalar abstraction shared by the special-function layer.

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::Debug;

/// Floating point type usable by the generic kernels.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal, panicking only if the target type cannot hold it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in target scalar")
    }

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in target scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact rational used for coefficients and multiplicities.
pub type Rational = num_rational::Ratio<i128>;

pub fn rat(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Formats a rational as "num/den" (or just "num" when integral).
pub fn rat_string(r: &Rational) -> String {
    if *r.denom() == 1 {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
