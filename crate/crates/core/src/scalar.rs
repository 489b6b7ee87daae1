//! Scalar abstraction: every numeric kernel is generic over `Real`.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar for jets, tensors, and curvature formulas.
///
/// Implemented by `f32` and `f64`. Tolerance-grade results need `f64`;
/// the `f32` instantiation exists for cheap smoke tests and to keep the
/// kernels honest about scalar-type assumptions.
pub trait Real:
    Float + FromPrimitive + NumAssign + Default + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from f64 (exact for f64 itself).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Exact conversion from a small unsigned integer.
    fn from_count(v: usize) -> Self {
        Self::from_usize(v).expect("small usize converts to any Real")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + NumAssign
        + Default
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}
