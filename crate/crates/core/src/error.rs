use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column '{column}': cannot read '{value}' as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("k = {k} is out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("random-guess baseline is undefined (MAE_p0 = 0)")]
    UndefinedBaseline,

    #[error("objective evaluation produced a non-finite value {values:?} at iteration {iteration}")]
    NonFiniteObjective { iteration: usize, values: Vec<f64> },

    #[error("config error: {0}")]
    Config(String),

    #[error("dataset '{dataset}', method '{method}': {source}")]
    Context {
        dataset: String,
        method: String,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that come from bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Schema(_) | Error::Config(_) | Error::Json(_) => true,
            Error::Context { source, .. } | Error::Fold { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
