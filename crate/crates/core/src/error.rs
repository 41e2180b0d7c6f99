use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the discovery engine and its supporting modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate column name {0:?}")]
    DuplicateName(String),

    #[error("column {0:?} has zero variance")]
    ZeroVariance(String),

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{n} samples is too few (need at least {min})")]
    TooFewSamples { n: usize, min: usize },

    #[error("rank-deficient spline basis: {0}")]
    RankDeficient(String),

    #[error("median pairwise distance is zero for the {0} argument; residuals are degenerate")]
    DegenerateBandwidth(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("phase 1 exceeded {cap} sink acceptances without converging")]
    SweepCap { cap: usize },

    #[error("graph is not acyclic")]
    Cyclic,

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
