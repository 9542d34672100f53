//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A graph operation required a DAG but the input contains a cycle.
    /// Carries one edge that participates in a cycle.
    #[error("graph contains a cycle through edge {from} -> {to}")]
    Cycle { from: usize, to: usize },

    /// Aggregation over an empty set (vehicle with no matched sub-operations).
    #[error("aggregation over empty input: {0}")]
    EmptyAggregation(String),

    /// Phi coefficient is undefined because one variable is constant.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// Two graphs or datasets cannot be compared.
    #[error("shape mismatch: {0}")]
    Mismatch(String),

    /// Numerical failure inside a solver (overflow, stalled line search).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An iterate left the M-matrix domain of the log-det acyclicity function.
    #[error("log-det domain violation: {0}")]
    Domain(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
