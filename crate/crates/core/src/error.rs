use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the CFA library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image decode failed for {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("numerical failure: {what} (reciprocal condition estimate {rcond:.3e})")]
    Singular { what: String, rcond: f64 },

    #[error("model bundle: {0}")]
    Format(String),

    #[error("class {class}: {source}")]
    Class {
        class: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_class(self, class: usize) -> Self {
        Error::Class {
            class,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a singular or indefinite system.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. } => true,
            Error::Class { source, .. } | Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Innermost error with stage and class annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Class { source, .. } | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
