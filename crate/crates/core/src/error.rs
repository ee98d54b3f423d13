use thiserror::Error;

use crate::minimizer::SupportPattern;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |m_ij - conj(m_ji)| = {max_asymmetry:e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("matrix is not square: {rows} rows, {cols} columns")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampler failed after {draws} draws for pattern {pattern}: {reason}")]
    SamplerFailure {
        pattern: SupportPattern,
        draws: usize,
        reason: String,
    },

    #[error("no restart converged ({restarts} attempted, {feasible} ended feasible)")]
    NoConvergence { restarts: usize, feasible: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
