use thiserror::Error;

use crate::gp::GpHyperparams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cholesky factorization failed after jitter escalation up to {max_jitter:e}")]
    Factorization { max_jitter: f64 },

    #[error("training failed at epoch {epoch}: {source}")]
    Training {
        epoch: usize,
        /// Hyperparameters of the last successfully factorized model.
        last_valid: Box<GpHyperparams>,
        #[source]
        source: Box<Error>,
    },

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error("unknown benchmark `{name}` (known: {known})")]
    UnknownBenchmark { name: String, known: String },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
