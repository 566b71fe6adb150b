use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("time grid is not uniform: spacing {found} differs from {expected} at index {index}")]
    NonUniformGrid {
        index: usize,
        expected: f64,
        found: f64,
    },

    #[error("time grids do not match at index {index}: {left} vs {right}")]
    GridMismatch { index: usize, left: f64, right: f64 },

    #[error("non-finite {what} at training iteration {iteration}, step {step}")]
    NonFiniteTraining {
        what: &'static str,
        iteration: usize,
        step: usize,
    },

    #[error(
        "only {retained} of {required} trajectories stayed finite after {attempts} attempts \
         ({discarded} discarded)"
    )]
    InsufficientTrajectories {
        required: usize,
        retained: usize,
        discarded: usize,
        attempts: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
