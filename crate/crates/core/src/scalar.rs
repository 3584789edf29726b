//! Floating-point abstraction shared by the deterministic numerics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used by the kinetics, quadrature and curve-fitting code.
///
/// Implemented for `f32` and `f64`. Stochastic simulation and count-data
/// estimators work on `f64` only.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent
    /// finite `f64` values, which never happens for the implemented types.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine-precision-scaled tolerance used by the rank checks.
    fn tiny() -> Self {
        Self::epsilon() * Self::lit(16.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
