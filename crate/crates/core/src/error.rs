use thiserror::Error;

/// Errors produced by the geometry, kernel, rank and tensor routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("point is not on the unit sphere (norm {norm})")]
    NotOnSphere { norm: f64 },

    #[error("tangent vector is not tangent at its base point (inner product {inner})")]
    NotTangent { inner: f64 },

    #[error("tangent vector norm {norm} is outside the injectivity radius")]
    OutsideInjectivity { norm: f64 },

    #[error("log map undefined for antipodal points {first} and {second}")]
    Antipodal { first: usize, second: usize },

    #[error("sample size must be at least 1")]
    EmptySample,

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("matrix or vector contains non-finite entries")]
    NonFinite,

    #[error("singular value decomposition did not converge")]
    NoConvergence,

    #[error("kernel {0} has no settled rank classification")]
    UnclassifiedKernel(String),

    #[error("sample does not belong to this operator field")]
    SampleMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
