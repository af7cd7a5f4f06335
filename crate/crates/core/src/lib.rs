//! Risk-sensitive analysis of generalized momentum methods on strongly convex
//! objectives: exact risk indices and H∞ gains on quadratics, Riccati-based
//! evaluation, matrix-inequality bounds for smooth strongly convex functions,
//! large-deviation tail bounds, and Monte Carlo estimation.

// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dare;
pub mod error;
pub mod ext;
pub mod gmm;
pub mod linalg;
pub mod montecarlo;
pub mod noise;
pub mod numeric;
pub mod problems;
pub mod risk_bounds;
pub mod risk_exact;

/// Library version, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use ext::ExtReal;
pub use gmm::{resolve_preset, GmmParams, GmmState, PresetId};
pub use noise::NoiseModel;
pub use problems::{HuberProblem, Problem, ProblemSpec, QuadraticProblem};
