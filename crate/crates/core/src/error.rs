use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Setup(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("numerical divergence at step {step}: {message}")]
    Divergence { step: u64, message: String },

    #[error("consistency violation at step {step}, cell {cell:?}: {message}")]
    Consistency { step: u64, cell: [usize; 3], message: String },

    #[error("heel angle {alpha_deg} deg outside wall-sided range (limit {limit_deg} deg)")]
    WallSided { alpha_deg: f64, limit_deg: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Setup(_) | Error::InvalidArgument(_) => 1,
            Error::WallSided { .. } => 1,
            Error::NonFinite(_) | Error::Divergence { .. } => 2,
            Error::Consistency { .. } => 3,
            Error::Io { .. } => 1,
        }
    }
}
