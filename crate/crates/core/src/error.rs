use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or solver invariant does not hold.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate front geometry: width h - g = {0}")]
    DegenerateGeometry(f64),

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("fixed-point iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("density bound violated by {amount:e} at t = {t}")]
    BoundViolation { t: f64, amount: f64 },

    /// The estimator or search ran out of budget before meeting its tolerance.
    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("bracket [{lo}, {hi}] does not enclose a sign change ({detail})")]
    BadBracket { lo: f64, hi: f64, detail: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("nothing to write: {0}")]
    EmptyData(&'static str),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
