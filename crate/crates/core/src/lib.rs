//! ℓ1-penalized convex-loss M-estimation over a dictionary of highly
//! correlated base functions, together with the machinery behind its
//! non-asymptotic bounds: covering numbers, Maurey sparsification, suprema of
//! Rademacher increments, concentration tails, and Monte Carlo checks of every
//! explicit constant.
//!
//! Numeric modules are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases. Solver internals run in `f64`.

// `!(x > 0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod covering;
pub mod design;
pub mod epl;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod maurey;
pub mod mc;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::Real;

pub type FunctionSystemF64 = design::FunctionSystem<f64>;
pub type FunctionSystemF32 = design::FunctionSystem<f32>;
pub type CoefVectorF64 = design::CoefVector<f64>;
pub type CoefVectorF32 = design::CoefVector<f32>;
pub type InstanceF64 = design::SyntheticInstance<f64>;
pub type InstanceF32 = design::SyntheticInstance<f32>;
pub type CoveringReportF64 = covering::CoveringReport<f64>;
pub type SparsificationPlanF64 = maurey::SparsificationPlan<f64>;
pub type FitResultF64 = estimator::FitResult<f64>;
