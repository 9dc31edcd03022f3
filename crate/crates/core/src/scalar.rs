//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar usable by every numeric routine in the crate.
///
/// Implemented for `f32` and `f64`. Rasters are usually stored as `f32`
/// reflectance while training and statistics run in `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; never fails for finite input.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize fits in a float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts between scalar types through `f64`.
#[inline]
pub fn cast<A: Scalar, B: Scalar>(v: A) -> B {
    B::lit(v.as_f64())
}
