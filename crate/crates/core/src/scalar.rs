//! Scalar types usable as factor potentials.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// A non-negative real potential value.
///
/// Implemented for `f32` and `f64`. Information metrics (divergence, mass,
/// upper-bound entropy) are always reported as `f64` regardless of the
/// potential type.
pub trait Potential:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts from `f64`, rounding to the nearest representable value.
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).unwrap_or_else(Self::nan)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Potential for f32 {}
impl Potential for f64 {}
