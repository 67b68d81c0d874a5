//! Application-level errors and their process exit codes.

use std::fmt;

/// Everything the CLI can fail with. Validation problems exit with 1,
/// solver failures with 2.
#[derive(Debug)]
pub enum AppError {
    /// Malformed or missing mesh-format header.
    MeshHeader(String),
    /// Header is well formed but names a version this build cannot read.
    MeshVersion(String),
    /// File ended before the announced counts were satisfied.
    MeshTruncated { expected: String },
    /// Unparseable or out-of-range value at a specific line.
    MeshValue { line: usize, message: String },
    Config(String),
    Io(std::io::Error),
    Core(tfsolve_core::Error),
}

impl AppError {
    pub fn config(message: impl Into<String>) -> AppError {
        AppError::Config(message.into())
    }

    /// CLI exit code: 1 for validation problems, 2 for solver failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Core(e) => match e {
                tfsolve_core::Error::SolverFailure { .. }
                | tfsolve_core::Error::NewtonDiverged { .. }
                | tfsolve_core::Error::TimeStepRetriesExhausted { .. }
                | tfsolve_core::Error::CoarseningStagnation { .. }
                | tfsolve_core::Error::ZeroDiagonal(_)
                | tfsolve_core::Error::NonPositiveEigenEstimate(_) => 2,
                _ => 1,
            },
            _ => 1,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::MeshHeader(m) => write!(f, "mesh header: {m}"),
            AppError::MeshVersion(m) => write!(f, "unsupported mesh version: {m}"),
            AppError::MeshTruncated { expected } => {
                write!(f, "mesh file truncated: expected {expected}")
            }
            AppError::MeshValue { line, message } => write!(f, "mesh line {line}: {message}"),
            AppError::Config(m) => write!(f, "config: {m}"),
            AppError::Io(e) => write!(f, "io: {e}"),
            AppError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

impl From<tfsolve_core::Error> for AppError {
    fn from(e: tfsolve_core::Error) -> Self {
        AppError::Core(e)
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
