//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar (`f32` or `f64`).
///
/// Everything that factorizes or decomposes a matrix goes through nalgebra,
/// so the bound is `RealField`; `FromPrimitive`/`ToPrimitive` cover the
/// conversions needed for constants and for reporting.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn nan() -> Self {
        Self::lit(f64::NAN)
    }

    #[allow(clippy::eq_op)]
    fn is_nan_value(self) -> bool {
        self != self
    }

    fn is_finite_value(self) -> bool {
        self.to_f64().is_some_and(f64::is_finite)
    }

    fn machine_epsilon() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}
