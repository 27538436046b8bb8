use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// No template pair matched at length m or m+1.
    #[error("sample entropy is undefined: {0}")]
    UndefinedEntropy(String),

    #[error("no period detected")]
    NoPeriod,

    #[error("no fiber has enough complete templates to rank regularity")]
    NoRegularSeries,

    #[error("mask observes no entries")]
    NothingObserved,

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
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

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-parsable class used by the CLI's error line and exit code.
    pub fn class(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) | Error::InvalidInput(_) | Error::NothingObserved => {
                "input"
            }
            Error::UndefinedEntropy(_) | Error::NoPeriod | Error::NoRegularSeries => "analysis",
            Error::Config(_) => "config",
            Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => "parse",
            Error::Io { .. } => "io",
        }
    }
}
