use thiserror::Error;

/// Errors raised by the model, generator and estimator layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("uniform variate {0} is outside the open interval (0, 1)")]
    UniformOutOfRange(f64),

    #[error("time {t} is outside the observation window [0, {horizon})")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("input too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("trace grids do not match: {0}")]
    GridMismatch(String),

    #[error("non-finite intermediate value: {0}")]
    NonFinite(String),

    #[error("asymptotic regime not reached: {0}")]
    FitRejected(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
