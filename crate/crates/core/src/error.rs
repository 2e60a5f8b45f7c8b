use std::path::PathBuf;

use thiserror::Error;

use crate::design::Material;

pub type Result<T, E = GcsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GcsError {
    #[error("parameter `{parameter}` = {value} is outside its range [{lo}, {hi}]")]
    OutOfRange {
        parameter: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("row {row}: {reason}")]
    InvalidCurve { row: usize, reason: String },

    #[error("bisection did not converge within {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },

    #[error("no density configured for material {0}")]
    MissingDensity(Material),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt or malformed data: {0}")]
    Malformed(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GcsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GcsError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            GcsError::OutOfRange { .. }
                | GcsError::DimensionMismatch { .. }
                | GcsError::TooFewPoints { .. }
                | GcsError::InvalidCurve { .. }
                | GcsError::MissingDensity(_)
                | GcsError::Empty(_)
                | GcsError::InvalidInput(_)
                | GcsError::MissingColumn(_)
        )
    }
}
