use thiserror::Error;

use crate::model::ValidationReport;

/// Errors produced by the model, solvers, oracles and the scenario loader.
#[derive(Debug, Error)]
pub enum RmabError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver did not converge after {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("size cap exceeded: {count} > {cap} ({what})")]
    TooLarge {
        what: &'static str,
        count: u128,
        cap: u128,
    },

    #[error("horizon tail bound {tail:e} exceeds tolerance {tol:e}")]
    HorizonTail { tail: f64, tol: f64 },

    #[error("scenario rejected:\n{0}")]
    Rejected(ValidationReport),

    #[error("scenario file line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid policy spec `{0}`")]
    PolicySpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RmabError>;
