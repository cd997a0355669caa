use crate::mesh::Point;
use crate::nse_state::NewtonReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("point ({}, {}) lies outside the domain", point[0], point[1])]
    OutOfDomain { point: Point },

    #[error("linear solve failed: {reason} (relative residual {residual:e})")]
    Solver { reason: String, residual: f64 },

    #[error("Newton iteration did not converge after {} iterations", report.iterations)]
    NonlinearSolve { report: NewtonReport },

    #[error("optimization failed: {0}")]
    Opt(String),

    #[error("diagnostic failed: {0}")]
    Diagnostic(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
