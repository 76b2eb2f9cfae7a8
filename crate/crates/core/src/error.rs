use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid network: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported norm order {0}; only p = inf is implemented")]
    UnsupportedNorm(String),

    #[error("inconsistent bounds: {0}")]
    InconsistentBounds(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("auxiliary variable {index} has no derivable bound; supply an explicit one")]
    UnboundedAuxiliary { index: usize },

    #[error("non-finite dual value at iteration {iteration}")]
    NonFinite { iteration: usize, diagnostic: String },

    #[error("simplex pivot cap of {0} reached")]
    IterationLimit(usize),

    #[error("LP certificate check failed: {0}")]
    Certificate(String),

    #[error("enumeration needs 2^{needed} leaves, cap is 2^{cap}")]
    EnumerationCap { needed: usize, cap: usize },

    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn write(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Write {
            path: path.into(),
            source,
        }
    }
}
