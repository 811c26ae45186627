use thiserror::Error;

/// Errors raised by the constructors and numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid body description: {0}")]
    InvalidBody(String),
    #[error("exponent q = {q} is outside the convex range [1, inf]")]
    NonConvexExponent { q: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("linear map is singular or ill-conditioned: {0}")]
    SingularMap(String),
    #[error("degenerate body: Minkowski functional {norm:.3e} in direction {direction:?}")]
    DegenerateBody { norm: f64, direction: Vec<f64> },
    #[error("direction is not a unit vector (|x| = {length})")]
    NotUnitVector { length: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid density description: {0}")]
    InvalidDensity(String),
    #[error("density term {0} has odd total degree")]
    OddDensityTerm(usize),
    #[error("frame is not orthonormal (Gram deviation {deviation:.3e})")]
    FrameNotOrthonormal { deviation: f64 },
    #[error("codimension k = {k} is outside 1..={max}")]
    InvalidCodimension { k: usize, max: usize },
    #[error("rejection sampling is infeasible: acceptance rate {rate:.3e}")]
    InfeasibleSampling { rate: f64 },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("unsupported body for this operation: {0}")]
    UnsupportedBody(String),
    #[error("series must be even: {0}")]
    OddSeries(String),
    #[error("Fourier multiplier validation failed: {0}")]
    ValidationFailed(String),
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),
    #[error("no negative direction of the transform was found (min {min:.3e}); the body may be an intersection body")]
    NotACounterexampleSeed { min: f64 },
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse { line: usize, field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
