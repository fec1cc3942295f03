//! Scalar abstraction shared by the inference engines.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the conjugate and grid engines are generic over.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Log-density floor; anything below it is treated as zero mass.
    /// Sits near the point where `exp` underflows for this type.
    const LOG_FLOOR: f64;
    /// Relative determinant threshold below which a 2x2 covariance is
    /// rejected as numerically singular (`det < rtol * ||cov||_F^2`).
    const SINGULAR_RTOL: f64;

    /// Converts an `f64` literal. Panics only if the value is not
    /// representable at all, which never happens for finite constants.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn log_floor() -> Self {
        Self::lit(Self::LOG_FLOOR)
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    /// `ln(2*pi)`.
    #[inline]
    fn ln_2pi() -> Self {
        (Self::TAU()).ln()
    }
}

impl Scalar for f64 {
    const LOG_FLOOR: f64 = -745.0;
    const SINGULAR_RTOL: f64 = 1e-15;
}

impl Scalar for f32 {
    // smallest f32 subnormal is ~1.4e-45
    const LOG_FLOOR: f64 = -103.0;
    const SINGULAR_RTOL: f64 = 1e-6;
}
