//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the dynamics, kinematics and control code.
///
/// Implemented for `f32` and `f64`. Literal constants are converted through
/// [`Real::lit`], results leave through [`Real::f64`].
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn finite(self) -> bool {
        self.f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
