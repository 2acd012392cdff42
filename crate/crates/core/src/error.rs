use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty input")]
    Empty,
    #[error("parse error at row {row}, column {column:?}: {value:?} is not a finite number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("ragged input: row {row} has {found} fields, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("column {0:?} has zero variance")]
    ZeroVariance(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigenvalue iteration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("{what} = {value} is out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: String,
    },
    #[error("correlation undefined: flattened {0} has zero variance")]
    UndefinedCorrelation(&'static str),
    #[error("covariance of {which} is singular (condition number {condition:e})")]
    SingularCovariance { which: &'static str, condition: f64 },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("zero range: {0}")]
    ZeroRange(String),
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("curve fit failed: {0}")]
    FitFailed(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidPolicy(_) | Error::UnknownMetric(_) | Error::InvalidParameter(_) => {
                ErrorKind::Config
            }
            Error::NotSymmetric(_)
            | Error::NoConvergence(_)
            | Error::UndefinedCorrelation(_)
            | Error::SingularCovariance { .. }
            | Error::FitFailed(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
