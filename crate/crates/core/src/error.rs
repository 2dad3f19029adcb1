//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("coefficient error: {0}")]
    Coeff(String),

    #[error("linear solve failed at time level {level}: {reason}")]
    LinearSolve { level: usize, reason: String },

    #[error("Picard iteration did not converge after {iterations} iterations (last update {last_update:.3e})")]
    MaxIterationsExceeded { iterations: usize, last_update: f64 },

    #[error("estimate error: {0}")]
    Estimate(String),

    #[error("field does not satisfy its equation: relative residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualCheck { residual: f64, tol: f64 },

    #[error("inverse problem error: {0}")]
    Inverse(String),

    #[error("positivity floor violated: |{name}({x:.6}, t0)| = {value:.3e} < {floor:.3e}")]
    PositivityFloor {
        name: &'static str,
        x: f64,
        value: f64,
        floor: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
