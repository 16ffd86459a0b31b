use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{0} contains no usable sentences")]
    EmptyCorpus(String),

    #[error("sentence {index} has no tokens")]
    EmptySentence { index: usize },

    #[error("embedding format error: {0}")]
    Format(String),

    #[error("invalid embedding matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("metric {metric} needs sentence embeddings")]
    MissingEmbeddings { metric: String },

    #[error("{metric}: {reason}")]
    Metric { metric: String, reason: String },

    #[error("metric failed on pair (c{i}, c{j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient source size: {0}")]
    InsufficientSource(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("distance table has no entry for (rep {rep}, c{i}, c{j})")]
    MissingPair { rep: usize, i: usize, j: usize },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn metric(metric: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Metric {
            metric: metric.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the inputs rather than the configuration.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::Config(_) | Error::UnknownMetric(_) | Error::InvalidParameter(_)
        )
    }
}
