use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("system size N={n} exceeds the enumeration limit {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("conditioning event has zero probability")]
    EmptyEvent,

    #[error("curvature {second_deriv:e} at m={m} is too close to zero")]
    DegenerateCurvature { m: f64, second_deriv: f64 },

    #[error("regime mismatch: expected {expected}, found {found}")]
    RegimeMismatch { expected: String, found: String },

    #[error("solver did not converge ({what}); best residual {best_residual:e}")]
    SolverFailure { what: &'static str, best_residual: f64 },

    #[error("point m={m} is not a nondegenerate maximizer (H''={second_deriv:e})")]
    InvalidMaximizer { m: f64, second_deriv: f64 },

    #[error("beta={beta} does not exceed the consistency threshold {beta_star}")]
    ConsistencyImpossible { beta: f64, beta_star: f64 },

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("truncation |T| <= K sqrt(N) with K={k} leaves the neighbourhood [{lo}, {hi}]")]
    TruncationTooWide { k: f64, lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
