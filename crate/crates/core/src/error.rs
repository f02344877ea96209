use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("value outside the domain: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("quantile knots collapse at percentile {percentile}")]
    DuplicateKnot { percentile: f64 },
    #[error("exact fit: {zeros} of {n} values are zero, scale estimate is 0")]
    ExactFit { zeros: usize, n: usize },
    #[error("no sign change bracketing the root: {0}")]
    NoBracket(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("value {value} outside the attainable range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("efficiency {target} not attained on the search window; curve has {} points", curve.len())]
    Calibration { target: f64, curve: Vec<(f64, f64)> },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("all candidate fits failed: {0}")]
    AllFailed(String),
    #[error("too many failed refits: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
