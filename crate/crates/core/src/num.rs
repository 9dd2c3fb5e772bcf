use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar accepted by the closed-form parts of the crate.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from `f64`; exact for every constant used in this crate.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable in every Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `value` as a nonnegative integer count, or `None` when it is negative, NaN
/// or too large for `usize`.
pub(crate) fn to_count<T: Scalar>(value: T) -> Option<usize> {
    if value.is_nan() || value < T::zero() {
        return None;
    }
    value.to_usize()
}
