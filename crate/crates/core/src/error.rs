use crate::group::HPoint;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("degenerate box: lo {lo:?} must be strictly below hi {hi:?} on every axis")]
    DegenerateBox { lo: HPoint, hi: HPoint },

    #[error("malformed control: {0}")]
    MalformedControl(String),

    #[error("control value {value:?} in segment {segment} lies outside the ball of radius {radius}")]
    ControlOutsideBall {
        segment: usize,
        value: (f64, f64),
        radius: f64,
    },

    #[error("non-finite value {value} at {context}")]
    NonFinite { context: String, value: f64 },

    #[error("{0}")]
    Precondition(String),

    #[error("certified region is empty on axis {axis}: margin {margin} exceeds half extent {half_extent}; enlarge the box")]
    EmptyCertifiedRegion {
        axis: usize,
        margin: f64,
        half_extent: f64,
    },

    #[error("lattice radius {lattice} does not match control radius {expected}")]
    LatticeMismatch { lattice: f64, expected: f64 },

    #[error("no smooth probes: all {excluded} probes were excluded as kinks")]
    NoSmoothProbes { excluded: usize },

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn non_finite(context: impl Into<String>, value: f64) -> Self {
        Error::NonFinite {
            context: context.into(),
            value,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
