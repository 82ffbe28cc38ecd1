use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const SCHEMA: i32 = 3;
    pub const INPUT: i32 = 4;
    pub const NON_CONVERGENCE: i32 = 5;
    pub const INFEASIBLE: i32 = 6;
    pub const IO: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Config text that does not match the schema.
    #[error("config error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] nvp1_core::error::Error),
}

impl CliError {
    pub fn schema(msg: impl Into<String>) -> Self {
        CliError::Schema(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use nvp1_core::error::Error as E;
        match self {
            CliError::Schema(_) => exit::SCHEMA,
            CliError::Io { .. } | CliError::Core(E::Io(_)) => exit::IO,
            CliError::Core(E::NonConvergence { .. }) => exit::NON_CONVERGENCE,
            CliError::Core(E::Infeasible(_)) => exit::INFEASIBLE,
            CliError::Core(_) => exit::INPUT,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
