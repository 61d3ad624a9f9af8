use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid modulation order {0}: must be a perfect square >= 4")]
    InvalidModulation(u32),

    #[error("invalid correlation coefficient {0}: must lie in [0, 1)")]
    InvalidCorrelation(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("need at least {users} pilot slots, got {slots}")]
    InsufficientPilots { users: usize, slots: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("numerical failure at iteration {iteration}: {reason}")]
    NumericalFailure { iteration: usize, reason: String },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    TrainingDivergence { epoch: usize, loss: f64 },

    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches an iteration index to a linear-algebra failure.
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            Error::Singular(reason) | Error::Factorization(reason) => {
                Error::NumericalFailure { iteration, reason }
            }
            other => other,
        }
    }
}
