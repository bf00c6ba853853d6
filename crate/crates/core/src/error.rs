use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid chart: {0}")]
    Chart(String),
    #[error("invalid metric: {0}")]
    Metric(String),
    #[error("metric is singular at {point:?} (det = {det:e})")]
    SingularMetric { point: Vec<f64>, det: f64 },
    #[error("point {point:?} lies outside the chart domain")]
    OutOfDomain { point: Vec<f64> },
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error("charts are incompatible: {0}")]
    IncompatibleCharts(String),
    #[error("source not Einstein: residual {residual:e}, K spread {k_spread:e}")]
    SourceNotEinstein { residual: f64, k_spread: f64 },
    #[error("Sinyukov tensor is not invertible at {point:?}")]
    DegenerateSolution { point: Vec<f64> },
    #[error("non-finite state at arc position {arc} (point {point:?})")]
    BlowUp { arc: f64, point: Vec<f64> },
    #[error("invalid path: {0}")]
    Path(String),
    #[error("{path}:{line}:{column}: {message}")]
    MetricFile {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
