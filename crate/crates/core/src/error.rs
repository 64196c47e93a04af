use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("measure must have at least one atom")]
    Empty,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} outside the supported range 1..={max}", max = crate::measure::MAX_DIM)]
    UnsupportedDimension(usize),

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("weight {0} is not strictly positive")]
    NonPositiveWeight(f64),

    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("map undefined at support point {0}")]
    MapUndefined(usize),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("measure is not an element of the grid")]
    GridMiss,

    #[error("outer coupling is not deterministic at atom {atom}")]
    NonDeterministicOuter { atom: usize },

    #[error("inner plan of atom {atom} is not deterministic")]
    NonDeterministicInner { atom: usize },

    #[error("random coupling law is inconsistent with the outer coupling: {0}")]
    Inconsistent(String),

    #[error("interpolated points {first} and {second} of atom {atom} collide")]
    CollisionAtInterpolant {
        atom: usize,
        first: usize,
        second: usize,
    },

    #[error("covariance factorization failed: {0}")]
    Cholesky(String),

    #[error("degenerate basis: variance vanishes off the diagonal")]
    DegenerateBasis,
}

pub type Result<T> = std::result::Result<T, Error>;
