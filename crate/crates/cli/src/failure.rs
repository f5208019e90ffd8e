use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use gnss_rfi::io::IoError;

/// Error classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or malformed input, config or argument combination.
    Input(String),
    /// A region or report file was built from a different model.
    HashMismatch(String),
    /// Output present and `--force` not given.
    OutputExists(PathBuf),
    /// Inputs were readable but the data could not be processed.
    Data(String),
}

impl Failure {
    pub fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Failure::Data(msg.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Input(_) => 2,
            Failure::HashMismatch(_) => 3,
            Failure::OutputExists(_) => 4,
            Failure::Data(_) => 5,
        })
    }

    pub fn write_to(path: &Path, e: impl fmt::Display) -> Self {
        Failure::Data(format!("cannot write {}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Data(m) => f.write_str(m),
            Failure::HashMismatch(m) => write!(f, "hash mismatch: {m}"),
            Failure::OutputExists(p) => write!(f, "{} exists; pass --force to overwrite", p.display()),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::HashMismatch { .. } => Failure::HashMismatch(e.to_string()),
            IoError::Io { .. } | IoError::Format { .. } => Failure::Input(e.to_string()),
        }
    }
}
