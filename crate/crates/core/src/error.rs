use thiserror::Error;

/// Errors returned by the algorithmic core.
///
/// Algorithm failures (an instance entering its fallback mode) are *not*
/// errors: they are recorded in the [`RunTrace`](crate::trace::RunTrace).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value {0} lies outside [0, 1)")]
    ValueOutOfRange(f64),
    #[error("argument must be strictly positive, got {0}")]
    NonPositive(f64),
    #[error("cell {0} is empty")]
    EmptyCell(usize),
    #[error("sample is empty")]
    EmptySample,
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("parameters lie outside the concentration regime")]
    OutOfRegime,
    #[error("trace was produced by {found}, expected {expected}")]
    WrongAlgorithm { expected: &'static str, found: &'static str },
    #[error("trace contains no merge")]
    NoMerge,
    #[error("need at least {0} points")]
    TooFewPoints(usize),
    #[error("n values must be strictly increasing")]
    NotIncreasing,
    #[error("cost {0} is not strictly positive")]
    NonPositiveCost(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
