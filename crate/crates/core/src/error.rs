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

    /// Malformed input file; `location` names the line and/or field.
    #[error("{path}: parse error at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("[{module}] {context}: {message}")]
    Pipeline {
        module: &'static str,
        context: String,
        message: String,
    },

    #[error("image decode failed for {path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn pipeline(
        module: &'static str,
        context: impl Into<String>,
        message: impl std::fmt::Display,
    ) -> Self {
        Error::Pipeline {
            module,
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// True for errors caused by user-supplied input (config, manifests, parameters)
    /// rather than by a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Format { .. }
                | Error::DimensionMismatch(_)
                | Error::InvalidParameter(_)
        )
    }
}
