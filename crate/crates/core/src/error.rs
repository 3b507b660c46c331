use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by model construction, numerics and scenario I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parameter `{name}` out of range: {value} ({expected})")]
    Parameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("negative quality for technology {index}: {value}")]
    NegativeQuality { index: usize, value: f64 },

    #[error("negative R&D productivity F_i q + alpha = {value} in row {row}")]
    NegativeProductivity { row: usize, value: f64 },

    #[error("degenerate economy: total quality is zero")]
    DegenerateEconomy,

    #[error("integration blow-up at t = {last_good_time}: {detail}")]
    IntegrationBlowup { last_good_time: f64, detail: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("search exhausted after {tried} candidates: {detail}")]
    SearchExhausted { tried: usize, detail: String },

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: missing field `{field}`")]
    MissingField { path: PathBuf, field: &'static str },

    #[error("{path}:{line}: invalid scenario: {source}")]
    Validation {
        path: PathBuf,
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Dimension(_)
            | Error::NonFinite(_)
            | Error::Parameter { .. }
            | Error::NegativeQuality { .. }
            | Error::Precondition(_)
            | Error::Parse { .. }
            | Error::MissingField { .. }
            | Error::Validation { .. } => ErrorKind::Validation,
            Error::NegativeProductivity { .. }
            | Error::DegenerateEconomy
            | Error::IntegrationBlowup { .. }
            | Error::SearchExhausted { .. } => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
