use std::fmt;
use std::path::Path;

use pathoed_core::Error;

/// Process outcome other than success, one variant per exit code.
#[derive(Debug)]
pub enum Failure {
    /// A check ran and did not pass.
    Check(String),
    /// Bad flags, unreadable inputs, or invalid configuration.
    Usage(String),
    /// Sampling, evaluation, or numerical failure after setup.
    Runtime(String),
    /// An enumeration would exceed the configured cap.
    Cap(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Cap(_) => 4,
        }
    }

    /// Errors raised while loading inputs are all configuration problems.
    pub fn setup(e: Error) -> Self {
        match e {
            Error::SupportTooLarge { .. } => Failure::Cap(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Check(m) | Failure::Usage(m) | Failure::Runtime(m) | Failure::Cap(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SupportTooLarge { .. } => Failure::Cap(e.to_string()),
            Error::Config(_)
            | Error::InvalidMesh(_)
            | Error::InvalidParams(_)
            | Error::Parse { .. }
            | Error::Contract(_)
            | Error::DegenerateDistribution(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

pub fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}
