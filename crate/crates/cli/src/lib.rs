//! Command-line front end: builds systems from JSON configs and flags, runs
//! abstraction, synthesis and simulation, and writes artifacts to disk.

pub mod commands;
pub mod config;

use std::path::Path;

use thiserror::Error;

pub use commands::{run, Cli, Command};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    /// A check on the produced artifacts failed.
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("timed out: {0}")]
    Timeout(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Verification(_) => 2,
            CliError::Timeout(_) => 3,
        }
    }
}
