//! Batch front-end for the `afrelay` library: single evaluations, sweeps,
//! Monte-Carlo runs and the closed-form/quadrature/simulation cross-check.
pub mod config;
pub mod metric;
pub mod report;
pub mod sweep;
pub mod validate;

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Numerical(afrelay::Error),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<afrelay::Error> for CliError {
    fn from(e: afrelay::Error) -> Self {
        match e {
            afrelay::Error::Config(m) => CliError::Config(m),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
