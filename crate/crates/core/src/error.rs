use thiserror::Error;

/// Errors raised by the numerical layers and the experiment harness.
///
/// The type is `Clone` so that lazily tabulated quadrature levels can cache a
/// failed evaluation and hand the same error to every caller.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("complementary function unbounded at v = {v}: derivative bracket exceeded {cap:e}")]
    UnboundedComplement { v: f64, cap: f64 },

    #[error("degenerate N-function: phi({u}) = 0 for u > 0")]
    DegenerateNFunction { u: f64 },

    #[error("invalid N-function `{name}`: {reason}")]
    InvalidNFunction { name: String, reason: String },

    #[error("integrand is not finite at ({x1}, {x2})")]
    Integrand { x1: f64, x2: f64 },

    #[error("orlicz norm overflow: modular is infinite at every probed scale")]
    NormOverflow,

    #[error("dual witness infeasible: integral of the complement is {value} > 1")]
    ConstraintViolation { value: f64 },

    #[error(
        "series truncated at degree {degree} with weight mass {mass} (x = ({x1}, {x2})); \
         enlarge the degree budget or move x off the seam"
    )]
    HardTruncation {
        degree: usize,
        mass: f64,
        x1: f64,
        x2: f64,
    },

    #[error("rate fit unavailable: {0}")]
    FitUnavailable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
