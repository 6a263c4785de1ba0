//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown case id `{0}`")]
    UnknownCase(String),

    #[error("ill-posed Robin ratio: {0}")]
    IllPosedRatio(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// Cholesky hit a nonpositive pivot; `pivot` is the 0-based row index.
    #[error("matrix not positive definite: nonpositive pivot at row {pivot}")]
    NonpositivePivot { pivot: usize },

    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("shared-kernel mismatch: {0}")]
    KernelMismatch(String),

    #[error("mesh topology error: {0}")]
    Topology(String),

    #[error("unsupported boundary condition: {0}")]
    UnsupportedBoundary(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed field JSON: {0}")]
    FieldJson(String),
}

pub type Result<T> = std::result::Result<T, Error>;
