use thiserror::Error;

/// Errors raised by the coding library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is out of range (need 2 <= p < 2^63)")]
    ModulusOutOfRange(u64),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("computation graph has no edges")]
    EmptyGraph,
    #[error("edge ({0}, {1}) is out of range")]
    EdgeOutOfRange(usize, usize),
    #[error("degree bound k={k} must satisfy 1 <= k <= L_B={lb}")]
    InvalidDegree { k: usize, lb: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("rho={rho} must be positive and divide the bilinear rank {rank}")]
    InvalidRho { rho: usize, rank: usize },
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("field of size {modulus} too small: need more than {required}")]
    FieldTooSmall { modulus: u64, required: u64 },
    #[error("divisibility violated: {0}")]
    DivisibilityViolation(String),
    #[error("{workers} workers cannot meet recovery threshold {threshold}")]
    TooFewWorkers { workers: usize, threshold: usize },
    #[error("need {needed} worker results with distinct indices, got {got}")]
    TooFewResults { needed: usize, got: usize },
    #[error("subset count {count} exceeds budget {budget}")]
    SubsetBudgetExceeded { count: u128, budget: u128 },
    #[error("bilinear tensor failed the product identity check")]
    InvalidTensor,
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
