use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures of a command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input files. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while running. Exit code 3.
    #[error("{0}")]
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// Input-side failure naming the offending file.
    pub fn input(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Usage(format!("{}: {err}", path.display()))
    }

    /// Output-side failure naming the offending file.
    pub fn output(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Runtime(format!("{}: {err}", path.display()))
    }
}

impl From<dppo::Error> for CliError {
    fn from(err: dppo::Error) -> Self {
        use dppo::Error as E;
        match err {
            E::InvalidRiskParameter { .. }
            | E::OutOfRange { .. }
            | E::Config(_)
            | E::UnknownEnv(_)
            | E::SchemaVersion { .. }
            | E::StochasticPolicy
            | E::Empty(_) => CliError::Usage(err.to_string()),
            _ => CliError::Runtime(err.to_string()),
        }
    }
}

/// Reads a whole input file; a missing or unreadable file is a usage error.
pub fn read_input(path: &PathBuf) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))
}
