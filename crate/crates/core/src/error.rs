use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input is not valid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("word id {id} is out of range for a vocabulary of {len} words")]
    UnknownWordId { id: usize, len: usize },

    #[error("word {0:?} is not in the vocabulary")]
    UnknownWord(String),

    #[error("probability undefined: word {0:?} never occurs as a center word")]
    UndefinedProbability(String),

    #[error("degenerate correlation: {0} sample set has zero variance")]
    DegenerateCorrelation(&'static str),

    #[error("training diverged at epoch {epoch}: objective is not finite")]
    Diverged { epoch: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Other(#[from] std::io::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
