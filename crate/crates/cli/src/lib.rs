//! Driver for the verification pipeline: configuration, reports, the
//! randomized contract oracle and the corpus benchmark.

pub mod bench;
pub mod config;
pub mod lines;
pub mod oracle;
pub mod pipeline;

use std::fmt;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// Input rejected, a VC not proved, or a run failed.
    Failed = 1,
    Usage = 2,
    Internal = 3,
}

/// An error carrying the exit code it should produce.
#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> CliError {
        CliError { exit: Exit::Usage, message: m.into() }
    }

    pub fn failed(m: impl Into<String>) -> CliError {
        CliError { exit: Exit::Failed, message: m.into() }
    }

    pub fn internal(m: impl Into<String>) -> CliError {
        CliError { exit: Exit::Internal, message: m.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<pipeline::StageError> for CliError {
    fn from(e: pipeline::StageError) -> CliError {
        CliError::failed(e.to_string())
    }
}
