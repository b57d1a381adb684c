use std::path::PathBuf;

use thiserror::Error;

use crate::processor::ProcessorError;

/// Top-level error for everything the runtime, checker and probes can fail with.
#[derive(Debug, Error)]
pub enum Error {
    /// One or more configuration invariants were violated. Every violation is listed.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Processor(#[from] ProcessorError),

    #[error("architecture graph is invalid:\n  - {}", .0.join("\n  - "))]
    InvalidGraph(Vec<String>),

    #[error("probe configuration error: {0}")]
    ProbeConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
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

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
