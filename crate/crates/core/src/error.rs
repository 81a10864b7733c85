use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown POS tag `{tag}`")]
    UnknownPos { line: usize, tag: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot build a neighbor index over an empty vocabulary")]
    EmptyIndex,

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("unknown pair id `{0}`")]
    NotFound(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("missing predictions for {} item(s): {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error("reports cover different item sets")]
    MismatchedItems,

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("run incomplete: {pending} item(s) pending; resume from {resume}")]
    Partial { pending: usize, resume: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
