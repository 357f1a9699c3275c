//! Scalar abstraction for the numeric core.
//!
//! Everything in this crate that does arithmetic is generic over [`Scalar`],
//! which is satisfied by `f32` and `f64`. Concrete type aliases live at the
//! crate root.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate: a real field with
/// lossless-enough conversions from/to `f64` for constants and reporting.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Convert an `f64` constant into this scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant must convert")
    }

    /// Widen to `f64` for reporting and statistics.
    fn to_f64_value(self) -> f64 {
        self.to_f64().expect("scalar must widen to f64")
    }
}

impl<T> Scalar for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}
