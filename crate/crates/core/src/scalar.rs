//! Scalar abstraction shared by the geometric modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Floating point scalar the geometry code is generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64`, for reporting.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Normalizes an angle in degrees to `[0, 360)`.
pub fn normalize_degrees<T: Real>(deg: T) -> T {
    let full = T::lit(360.0);
    let r = deg % full;
    let r = if r < T::zero() { r + full } else { r };
    // `-1e-20 % 360 + 360` rounds to exactly 360
    if r >= full {
        T::zero()
    } else {
        r
    }
}

/// Wraps an angle in degrees to `(-180, 180]`.
pub fn wrap_degrees<T: Real>(deg: T) -> T {
    let n = normalize_degrees(deg);
    if n > T::lit(180.0) {
        n - T::lit(360.0)
    } else {
        n
    }
}
