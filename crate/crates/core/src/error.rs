use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an invalid argument (shape, range, window).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An iterative routine failed to meet its tolerance.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The data carry no signal the solver can use (for example `y = 0`).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The weight of the leftmost pole vanishes and the secular function
    /// never reaches its target below the pole.
    #[error(
        "hard case: secular equation has no root below the pole mu = {mu_pole:.6e} \
         (sup psi = {sup_psi:.6e} < target {target:.6e})"
    )]
    HardCase {
        mu_pole: f64,
        sup_psi: f64,
        target: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file, `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("serialization: {0}")]
    Serialization(String),

    /// An experiment could not produce a usable result.
    #[error("experiment failed: {0}")]
    Experiment(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller (bad flags, files, shapes).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Argument(_) | Error::Io { .. } | Error::Parse { .. } | Error::Serialization(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
