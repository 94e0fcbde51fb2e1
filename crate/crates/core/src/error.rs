//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical or structural precondition does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Evaluation at a singular point (coincident points, inversion pole, Gamma pole).
    #[error("singular point: {0}")]
    Singular(String),

    /// A quadrature, series or root finder did not reach its tolerance.
    #[error("numerical failure: {what} (achieved error estimate {achieved:.3e})")]
    Numerical { what: String, achieved: f64 },

    /// Lattice or quadrature budget exceeded.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// Configuration could not be parsed or is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(what: impl Into<String>, achieved: f64) -> Self {
        Error::Numerical {
            what: what.into(),
            achieved,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
