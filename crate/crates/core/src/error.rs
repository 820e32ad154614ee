use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Each variant maps onto one of the CLI exit classes via [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {malformed} of {lines} lines malformed, refusing to continue")]
    Schema {
        path: PathBuf,
        malformed: usize,
        lines: usize,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("author {0:?} is not a member of any agent")]
    UnmappedAuthor(String),

    #[error("metric {metric} is undefined: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn undefined(metric: &'static str, reason: impl Into<String>) -> Self {
        Error::UndefinedMetric {
            metric,
            reason: reason.into(),
        }
    }

    /// Process exit status: 1 usage/config, 2 data, 3 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) => 1,
            Error::Io { .. }
            | Error::Schema { .. }
            | Error::Parse { .. }
            | Error::UnmappedAuthor(_)
            | Error::UndefinedMetric { .. } => 2,
            Error::Invariant(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
