use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite state at t = {time:e} s (step too large?)")]
    NonFinite { time: f64 },

    #[error("trial {trial} aborted: {reason}")]
    TrialAborted { trial: u64, reason: String },

    #[error("all {trials} trials aborted")]
    AllTrialsAborted { trials: u64 },

    #[error("trajectory too short: {len} samples, need at least {min}")]
    TrajectoryTooShort { len: usize, min: usize },

    #[error("point ({x:e}, {y:e}) lies outside the wedge")]
    OutsideWedge { x: f64, y: f64 },

    #[error("corner event at t = {time:e} s")]
    CornerEvent { time: f64 },

    #[error("no wall crossing found from the current state")]
    NoCrossing,

    #[error("pump height lies above the orbit energy")]
    AboveOrbitEnergy,

    #[error("too few available modes ({modes:.3}) for the semiclassical estimate")]
    TooFewModes { modes: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
