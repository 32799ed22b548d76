use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar used for weights, timings and kernel arithmetic.
///
/// Implemented for `f32` and `f64`. Chunk sizes and iteration counts stay
/// integral (`u64`); only the quantities that are measured or averaged are
/// generic.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literal constants.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion from an iteration count.
    fn count(x: u64) -> Self {
        Self::from_u64(x).expect("count representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Ceiling of a non-negative real as an iteration count. Negative and NaN
/// inputs map to 0; values beyond `u64::MAX` saturate.
pub fn ceil_count<F: Real>(x: F) -> u64 {
    if !(x > F::zero()) {
        return 0;
    }
    x.ceil().to_u64().unwrap_or(u64::MAX)
}

/// Round half up to an iteration count.
pub fn round_half_up<F: Real>(x: F) -> u64 {
    if !(x > F::zero()) {
        return 0;
    }
    (x + F::lit(0.5)).floor().to_u64().unwrap_or(u64::MAX)
}
