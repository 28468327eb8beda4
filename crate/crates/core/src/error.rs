use thiserror::Error;

/// Every failure the simulator can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("size limit exceeded: {0}")]
    SizeLimitExceeded(String),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("Krylov evolution failed to converge: {0}")]
    ConvergenceFailure(String),
    #[error("zero distance between sites {0} and {1}")]
    ZeroDistance(usize, usize),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ensemble weights sum to {0}, expected 1")]
    WeightSumInvalid(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("non-physical density matrix: {0}")]
    NonPhysicalDensity(String),
    #[error("window too small: {0} sites, need at least 2")]
    WindowTooSmall(usize),
    #[error("invalid microstate table: {0}")]
    TableInvalid(String),
    #[error("invalid protocol configuration: {0}")]
    ConfigInvalid(String),
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("rotation angle undefined at trajectory {trajectory}, sample {sample}")]
    UndefinedAngle { trajectory: usize, sample: usize },
    #[error("non-physical probability {value} at time index {time}, site index {site}")]
    NonPhysical {
        value: f64,
        time: usize,
        site: usize,
    },
    #[error("linear depolarization correction invalid: gamma*t = {0}")]
    ApproximationInvalid(f64),
    #[error("grid shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("shot {shot} failed: {source}")]
    ShotFailed { shot: u64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
