use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, OnmfError>;

#[derive(Debug, Error)]
pub enum OnmfError {
    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("projection onto the Stiefel manifold is not unique: smallest singular value {sigma_min:e}")]
    RankDeficient { sigma_min: f64 },

    #[error("cannot form {k} nonempty clusters from {n} points")]
    Infeasible { n: usize, k: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative value {value} at ({row}, {col})")]
    NegativeValue { row: usize, col: usize, value: f64 },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid sparse structure: {0}")]
    InvalidSparse(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
