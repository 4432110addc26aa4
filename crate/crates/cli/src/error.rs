use std::path::PathBuf;

use thiserror::Error;
use uav_tpc::TpcError;

/// Failures of the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Solver(#[from] TpcError),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed scenario or report document.
    #[error("parse error: {0}")]
    Parse(String),

    /// Well-formed input with unusable values.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("plotting failed: {0}")]
    Plot(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for unusable scenarios, 3 for solver failures
    /// and 4 for I/O problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 4,
            CliError::Parse(_) | CliError::Invalid(_) => 2,
            CliError::Plot(_) => 4,
            CliError::Solver(e) => match e {
                TpcError::Usage(_)
                | TpcError::Domain(_)
                | TpcError::Infeasible(_)
                | TpcError::HorizonTooShort { .. } => 2,
                _ => 3,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
