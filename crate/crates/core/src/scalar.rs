//! Scalar abstraction for the numeric core.
//!
//! Everything in the tensor/tape/optimizer layers is generic over [`Scalar`]
//! so the same code runs at f32 or f64. The crate-level aliases pin the
//! shipped configuration to f64.

use std::fmt::{Debug, Display};

/// Floating-point scalar usable by the autodiff engine.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + num_traits::ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from f64, for literals and RNG draws.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    /// Lossy conversion to f64, for reporting and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
