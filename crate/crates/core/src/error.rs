use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate cluster: {0}")]
    DegenerateCluster(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {index} has zero norm")]
    ZeroNormPoint { index: usize },

    #[error("affinity matrix has no positive entry")]
    ZeroAffinity,

    #[error("invalid affinity entry at ({row}, {col}): {reason}")]
    InvalidAffinityEntry { row: usize, col: usize, reason: String },

    #[error("certain sets overlap at point {index}")]
    OverlappingSets { index: usize },

    #[error("all candidate points are excluded")]
    NoCandidates,

    #[error("fewer than {k} distinct rows for k-means")]
    TooFewDistinctRows { k: usize },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("parse error in {path} at line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("unknown preset '{name}'; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("infeasible angle construction: {0}")]
    InfeasibleAngles(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure comes from the input data (files, shapes,
    /// contents) rather than from the run configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::ZeroNormPoint { .. }
                | Error::ZeroAffinity
                | Error::InvalidAffinityEntry { .. }
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::DegenerateCluster(_)
        )
    }
}
