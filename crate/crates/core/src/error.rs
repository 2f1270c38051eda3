use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("point lies outside the domain: {0}")]
    OutsideDomain(String),

    #[error("degenerate comparison point: denominator density is zero")]
    ZeroDenominator,

    #[error("density degrees differ ({0} vs {1})")]
    DegreeMismatch(usize, usize),

    #[error("quadrature did not reach accuracy: best estimate {best} with error {error}")]
    AccuracyNotReached { best: f64, error: f64 },

    #[error("invalid candidate map: {0}")]
    InvalidCandidate(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("unsupported domain for this operation: {0}")]
    UnsupportedDomain(String),

    #[error("metric is singular or not positive definite at the evaluation point")]
    SingularMetric,

    #[error("finite differences produced non-finite values (step {0})")]
    StepSizeFailure(f64),

    #[error("vanishing density at the evaluation point")]
    VanishingDensity,

    #[error("zero tangent vector")]
    ZeroVector,

    #[error("sample set is empty")]
    EmptySample,

    #[error("genus {0} curve is not Carathéodory hyperbolic (need genus >= 2)")]
    NotHyperbolic(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
