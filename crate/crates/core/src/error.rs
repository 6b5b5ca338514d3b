use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point or parameter lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed input (NaN, wrong length, non-positive constant, ...).
    #[error("input error: {0}")]
    Input(String),
    /// Inconsistent solver or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// The oracle produced a non-finite value during a run.
    #[error("oracle returned a non-finite value at step {step}")]
    OracleNan { step: usize },
    /// One of several independent trajectories aborted.
    #[error("trajectory {index} aborted: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    /// An online loss stream broke its declared bound.
    #[error("protocol violation at step {step}: ||l||_inf = {norm} exceeds M = {bound}")]
    Protocol { step: usize, norm: f64, bound: f64 },
    /// Network file problems, with the line the problem was found on when known.
    #[error("network error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Network {
        line: Option<usize>,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::Input(format!("{what}[{i}] is not finite"))),
        None => Ok(()),
    }
}

pub(crate) fn check_positive(value: f64, name: &str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
