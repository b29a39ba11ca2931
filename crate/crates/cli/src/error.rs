use std::fmt;
use std::path::Path;

use ensel::clpso::SwarmError;
use ensel::{FormatError, PipelineError};

/// Failure of a subcommand, already classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input data, configuration or usage. Exit code 1.
    Invalid(String),
    /// Reading or writing a file failed. Exit code 2.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<SwarmError> for CliError {
    fn from(e: SwarmError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<ensel::fusion::FusionError> for CliError {
    fn from(e: ensel::fusion::FusionError) -> Self {
        CliError::Invalid(e.to_string())
    }
}
