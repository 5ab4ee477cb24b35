//! Exact finite-size laws, limit theorems and diagnostics for the p-spin
//! Curie-Weiss model.

// Negated comparisons deliberately send NaN down the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod landscape;
pub mod laplace;
pub mod law;
pub mod limit;
pub mod model;
pub mod mpl;
pub mod numeric;
pub mod rate;
pub mod sampler;
pub mod special;
pub mod stein;

pub use error::{Error, Result};
pub use model::{entropy, entropy_deriv, fixed_point_map, h_eval, DerivativeBundle, ModelParams};
