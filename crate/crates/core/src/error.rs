use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate wire label `{0}`")]
    LabelCollision(String),
    #[error("unknown wire label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid wire permutation: {0}")]
    InvalidPermutation(String),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix is not hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("kraus operators are not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),
    #[error("invalid process: {0}")]
    InvalidProcess(String),
    #[error("wire sets overlap on `{0}`")]
    OverlappingSets(String),
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frame operator is singular (smallest eigenvalue {0:e})")]
    SingularFrame(f64),
    #[error("numerical check failed: {0}")]
    Numerical(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
