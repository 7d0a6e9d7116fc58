use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("rating {raw} outside [{min}, {max}]")]
    RatingOutOfRange { raw: i64, min: i64, max: i64 },

    #[error("user `{0}` has no relevant history at this threshold")]
    NoRelevantHistory(String),

    #[error("cannot build an index over an empty collection")]
    EmptyCollection,

    #[error("unknown document `{0}`")]
    UnknownDoc(String),

    #[error("term distribution is not normalized (sum = {0})")]
    NotNormalized(f64),

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("no documents in location `{0}`")]
    NoDocsInLocation(String),

    #[error("missing trip context: {0}")]
    MissingContext(String),

    #[error("invalid value: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for failures of the estimation itself (as opposed to bad input data).
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate(_) | Error::NoRelevantHistory(_))
    }
}
