//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by callers that need to map failures onto
/// process exit codes: bad inputs versus numerical trouble during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Data,
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("Poisson mean must be positive and finite, got {0}")]
    NonPositiveMean(f64),

    #[error("covariance matrix is not positive definite")]
    CovarianceNotPositiveDefinite,

    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("component responsibility mass {weight:.3e} is below the empty-component threshold")]
    EmptyComponent { weight: f64 },

    #[error("weighted normal equations are singular beyond ridge rescue")]
    SingularSystem,

    #[error("observation {row} has zero density under every component")]
    NoFiniteComponent { row: usize },

    #[error("all {attempted} restarts failed: {}", format_causes(.causes))]
    AllRestartsFailed {
        attempted: usize,
        causes: Vec<(usize, String)>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an I/O error with the path it refers to.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::NonPositiveMean(_)
            | Error::CovarianceNotPositiveDefinite
            | Error::DegenerateParameter(_)
            | Error::EmptyComponent { .. }
            | Error::SingularSystem
            | Error::NoFiniteComponent { .. }
            | Error::AllRestartsFailed { .. } => ErrorCategory::Numerical,
            _ => ErrorCategory::Data,
        }
    }
}

fn format_causes(causes: &[(usize, String)]) -> String {
    causes
        .iter()
        .map(|(idx, cause)| format!("restart {idx}: {cause}"))
        .collect::<Vec<_>>()
        .join("; ")
}
