use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("basis index must be at least 1")]
    ZeroIndex,
    #[error("truncation dimension {0} is too small (need at least 2)")]
    DimensionTooSmall(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("window horizon {horizon} is shorter than the power {power}")]
    HorizonTooShort { power: usize, horizon: usize },
    #[error("interpolation interval is empty: a = {a} must be below b = {b}")]
    EmptyInterval { a: f64, b: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ladder exhausted: log|x| = {s_log} lies below the materialized floor {floor}")]
    LadderExhausted { s_log: f64, floor: f64 },
    #[error(
        "propagator entry overflows f64 (log magnitude {log_entry}); use the norm-only variant"
    )]
    PropagatorOverflow { log_entry: f64 },
    #[error("unknown integrator `{0}`")]
    UnknownIntegrator(String),
    #[error("unknown claim id `{0}`")]
    UnknownClaim(String),
}
