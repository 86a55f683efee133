use alloc::string::String;

/// Errors raised by the decomposition and verification routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty factor list")]
    EmptyFactors,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid party dimensions: {0}")]
    InvalidDims(String),
    #[error("invalid cut: {0}")]
    InvalidCut(String),
    #[error("invalid tolerances: {0}")]
    InvalidTolerances(String),
    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NonUnitary { deviation: f64 },
    #[error("zero matrix")]
    ZeroMatrix,
    #[error("matrix is not normal (deviation {deviation:.3e})")]
    NonNormal { deviation: f64 },
    #[error("expected Schmidt rank {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },
    #[error("NotRank2: {0}")]
    NotRank2(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("numerical failure in {stage}: residual {residual:.3e}")]
    NumericalFailure { stage: &'static str, residual: f64 },
    #[error("expected exactly 2 eigenvalue clusters, found {found}")]
    ClusterCountMismatch { found: usize },
    #[error("block {index} is not unitary (deviation {deviation:.3e})")]
    NonUnitaryBlock { index: usize, deviation: f64 },
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),
}

pub type Result<T> = core::result::Result<T, Error>;
