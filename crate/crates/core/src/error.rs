use thiserror::Error;

/// Errors raised by the solver and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("point is not in the cone interior: {0}")]
    NotInteriorPoint(String),

    /// The threshold `tau = lambda_{r+1}/2` does not separate the spectrum at rank `r`.
    #[error("degenerate spectrum at rank {rank}: tau = {tau:e}, lambda_r = {lambda_r:e}")]
    DegenerateSpectrum { rank: usize, tau: f64, lambda_r: f64 },

    #[error("preconditioner failure: {0}")]
    PreconditionerFailure(String),

    #[error("Krylov breakdown at iteration {iteration}: <p, Ap> = 0")]
    Breakdown { iteration: usize },

    #[error("instance generation failed: {0}")]
    GenerationFailure(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidDimension(msg.into()))
}
