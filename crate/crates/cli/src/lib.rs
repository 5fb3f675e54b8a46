//! Command-line front end for the `deltashock` model: configuration
//! parsing, the `analyze`, `simulate`, `compare` and `invert` commands, and
//! their CSV and JSON outputs.

pub mod commands;
pub mod config;
mod output;

pub use commands::{analyze, compare, invert, simulate};
pub use config::{GridOverride, Overrides, RunConfig};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const VALIDATION: u8 = 1;
    pub const NUMERIC: u8 = 2;
    pub const COMPARE_FAILED: u8 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("comparison FAILED: {0}")]
    CompareFailed(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => exit::VALIDATION,
            CliError::Numeric(_) => exit::NUMERIC,
            CliError::CompareFailed(_) => exit::COMPARE_FAILED,
        }
    }
}

impl From<deltashock::Error> for CliError {
    fn from(e: deltashock::Error) -> Self {
        use deltashock::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::NegativeTime(_)
            | E::UnsupportedMomentOrder(_)
            | E::UnrealizableModel { .. }
            | E::OutsideHalfPlane { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}
