//! Scalar types accepted for probabilities and ensemble weights.

use std::fmt;

use num_traits::Float;

/// Floating-point scalar; implemented for `f32` and `f64`.
pub trait Real: Float + fmt::Debug + fmt::Display + Send + Sync + 'static {
    /// Convert from `f64`, rounding to the nearest representable value.
    fn from_f64_lossy(value: f64) -> Self {
        <Self as num_traits::NumCast>::from(value).expect("finite f64 converts to any float type")
    }

    /// Lossless widening to `f64`.
    fn widen(self) -> f64 {
        self.to_f64().expect("float types widen to f64")
    }
}

impl Real for f32 {}

impl Real for f64 {}
