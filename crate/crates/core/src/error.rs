use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used to pick process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Computation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("event log is empty")]
    EmptyLog,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label undefined for student `{student}`: {reason}")]
    UndefinedLabel { student: String, reason: String },

    #[error("empty cohort: {0}")]
    EmptyCohort(String),

    #[error("class `{class}` has {count} members, fewer than k = {k}")]
    Stratification { class: String, count: usize, k: usize },

    #[error("unknown {kind} `{name}`")]
    Lookup { kind: &'static str, name: String },

    #[error("length mismatch: {0}")]
    Mismatch(String),

    #[error("value {value} outside {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("unsupported comparison: {0}")]
    UnsupportedComparison(String),

    #[error("cannot parse {what}: {input:?}")]
    Parse { what: &'static str, input: String },

    #[error("invalid synthetic cohort: {0}")]
    Unsatisfiable(String),

    #[error("{0}")]
    Computation(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn row(row: usize, message: impl Into<String>) -> Self {
        Error::Row {
            row,
            message: message.into(),
        }
    }

    pub(crate) fn parse(what: &'static str, input: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Unsatisfiable(_) => ErrorClass::Config,
            Error::MissingColumn(_)
            | Error::Row { .. }
            | Error::EmptyLog
            | Error::UndefinedLabel { .. }
            | Error::EmptyCohort(_)
            | Error::Parse { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io(_) => ErrorClass::Data,
            Error::Stratification { .. }
            | Error::Lookup { .. }
            | Error::Mismatch(_)
            | Error::OutOfRange { .. }
            | Error::UnsupportedComparison(_)
            | Error::Computation(_) => ErrorClass::Computation,
        }
    }
}
