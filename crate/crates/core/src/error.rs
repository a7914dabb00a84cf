use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alpha + beta + gamma = {sum} differs from 1 by more than 1e-12")]
    SumNotOne { sum: f64 },

    #[error("parameter `{name}` = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("quadrature did not converge: value {value:e}, error estimate {error_estimate:e} after {evaluations} evaluations")]
    NotConverged {
        value: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    #[error("standard-case formula requires c1 = c2 (a = 1), got a = {a}")]
    NotStandard { a: f64 },

    #[error("explicit initial graph must contain at least one edge")]
    EmptyInit,

    #[error("target edge count {target} must exceed the initial edge count {initial}")]
    TargetTooSmall { target: u64, initial: u64 },

    #[error("cell ({i}, {j}) lies outside the table truncation ({i_max}, {j_max})")]
    OutOfTruncation { i: u64, j: u64, i_max: u64, j_max: u64 },

    #[error("truncation residual {residual:e} exceeds 10% of the tail sum {sum:e}")]
    ResidualTooLarge { residual: f64, sum: f64 },

    #[error("no cells have expected count >= {min_expected}")]
    NoCells { min_expected: f64 },

    #[error("need at least {needed} positive-ccdf degrees in [{lo}, {hi}], found {found}")]
    InsufficientData {
        needed: usize,
        found: usize,
        lo: u64,
        hi: u64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
