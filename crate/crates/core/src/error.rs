use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the monitoring library.
///
/// `Data` covers malformed or semantically invalid input, `Config` covers bad
/// parameters. The CLI maps them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    /// Failure inside a named pipeline stage.
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn in_stage(stage: &str, source: Error) -> Self {
        match source {
            Error::Stage { .. } => source,
            other => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// The stage a failure happened in, if any.
    pub fn stage_name(&self) -> Option<&str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// True for errors caused by the input data rather than parameters or I/O.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_data_error(),
            other => matches!(other, Error::Data(_) | Error::Json(_) | Error::Csv(_)),
        }
    }
}
