use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate likelihood: observation {index} (t = {time}) has zero density")]
    DegenerateLikelihood { index: usize, time: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("unsupported family: {0}")]
    Unsupported(String),
    #[error("optimization failed to converge: {0}")]
    Convergence(String),
    #[error("quadrature did not converge on [{lo}, {hi}]: estimated error {err:e}")]
    Quadrature { lo: f64, hi: f64, err: f64 },
    #[error("sample too small for goodness-of-fit: {intervals} intervals leave {df} degrees of freedom")]
    SampleTooSmall { intervals: usize, df: i64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("negative likelihood-ratio statistic {0:e} exceeds optimizer noise")]
    NegativeStatistic(f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
