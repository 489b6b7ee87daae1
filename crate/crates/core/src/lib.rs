//! Chart-based symbolic-numeric curvature laboratory.
//!
//! Metric components are written in a small coordinate-expression language,
//! differentiated exactly through order 4 with truncated multivariate Taylor
//! arithmetic (jets), and pushed through the curvature hierarchy
//! metric -> Christoffel -> Riemann -> Ricci -> Weyl -> Cotton -> Bach.
//! On top of the engine sit pointwise identity/inequality checks, a zoo of
//! reference metrics with closed-form oracles, and quadrature over compact
//! members (volumes, L^p curvature norms, Sobolev quotients).
//!
//! All numeric kernels are generic over the scalar type via [`Real`];
//! the aliases below fix the f64 instantiations used by the check suite,
//! the quadrature module, and the CLI.

pub mod checks;
pub mod curvature;
pub mod expr;
pub mod jet;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod tensor;
pub mod zoo;

pub use scalar::Real;

/// Order-4 jet over f64, the differentiation substrate used everywhere.
pub type Jet64 = jet::Jet<f64>;
/// Dense pointwise tensor over f64.
pub type Tensor64 = tensor::Tensor<f64>;
/// Metric data (g, g^{-1}, sqrt det) at a point, over f64.
pub type MetricAtPoint64 = tensor::MetricAtPoint<f64>;
/// Jet-valued tensor field over f64.
pub type TensorField64 = curvature::TensorField<f64>;
/// Full curvature bundle over f64.
pub type CurvatureBundle64 = curvature::CurvatureBundle<f64>;
