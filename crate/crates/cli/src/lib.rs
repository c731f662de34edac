//! Pipeline plumbing behind the `crowdflow` binary: configuration files,
//! the track pipeline, evaluation against ground truth, output files and
//! SVG rendering.

pub mod commands;
pub mod config;
pub mod eval;
pub mod output;
pub mod pipeline;
pub mod render;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Missing or malformed input data; exit code 2.
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl From<crowdflow::Error> for CliError {
    fn from(e: crowdflow::Error) -> Self {
        use crowdflow::Error as E;
        match e {
            E::InvalidConfig(_) | E::UnknownPreset { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
