use std::fmt;

use xcrossnet::XcnError;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// A check ran and failed (exit 1).
    Check(String),
    /// Bad flags or configuration (exit 2).
    Usage(String),
    /// Unreadable or malformed input, unwritable output (exit 3).
    Io(String),
    /// NaN or infinite values during training or evaluation (exit 4).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Check(m) | CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<XcnError> for CliError {
    fn from(e: XcnError) -> Self {
        let msg = e.to_string();
        match e {
            XcnError::NonFinite(_) => CliError::Numeric(msg),
            XcnError::Io(_)
            | XcnError::Parse { .. }
            | XcnError::Checkpoint(_)
            | XcnError::UnsupportedVersion { .. }
            | XcnError::Json(_) => CliError::Io(msg),
            XcnError::DimensionMismatch { .. }
            | XcnError::OutOfVocab { .. }
            | XcnError::InvalidConfig(_)
            | XcnError::Empty(_)
            | XcnError::Undefined(_) => CliError::Usage(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
