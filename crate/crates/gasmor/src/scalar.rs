//! Floating-point abstraction shared by every numerical routine.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Real scalar usable throughout the crate (implemented for `f32` and `f64`).
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + LowerExp + Display + Debug + Send + Sync + 'static
{
    /// Machine epsilon of the type.
    fn epsilon() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_finite_val(self) -> bool {
        self.to_f64_lossy().is_finite()
    }
}

impl Scalar for f64 {
    fn epsilon() -> Self {
        f64::EPSILON
    }
}

impl Scalar for f32 {
    fn epsilon() -> Self {
        f32::EPSILON
    }
}

/// Shorthand for [`Scalar::lit`].
#[inline]
pub fn c<T: Scalar>(x: f64) -> T {
    T::lit(x)
}
