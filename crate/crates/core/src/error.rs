use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampling failure: {0}")]
    SamplingFailure(String),

    /// A density was requested at (or numerically on) the boundary of its support.
    #[error("density undefined on the support boundary: {0}")]
    BoundaryDensity(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("initialization error: {0}")]
    Initialization(String),

    #[error("non-finite log-likelihood for subject {subject}, variable `{variable}`")]
    Numerical { subject: usize, variable: String },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefix a sampling failure with the cell or parameter it happened in.
    pub(crate) fn in_context(self, what: impl std::fmt::Display) -> Self {
        match self {
            Error::SamplingFailure(msg) => Error::SamplingFailure(format!("{what}: {msg}")),
            Error::InvalidArgument(msg) => Error::InvalidArgument(format!("{what}: {msg}")),
            other => other,
        }
    }
}
