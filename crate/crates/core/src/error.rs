use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not compose.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A scalar or count parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data violates a domain requirement (e.g. negative entries).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed file contents.
    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    /// Experiment configuration is inconsistent or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// A solver produced a non-finite value.
    #[error("numerical failure in {context} at iteration {iteration}")]
    Numerical { context: String, iteration: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Error raised inside a named pipeline stage.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Prefixes the context of a numerical failure, leaving other kinds untouched.
    pub(crate) fn with_block(self, block: &str) -> Self {
        match self {
            Error::Numerical { context, iteration } => Error::Numerical {
                context: format!("{block}: {context}"),
                iteration,
            },
            other => other,
        }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 1 configuration, 2 data/format, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Parameter(_) | Error::Dimension { .. } => 1,
            Error::Domain(_) | Error::Format { .. } | Error::Io { .. } => 2,
            Error::Numerical { .. } => 3,
            Error::Stage { .. } => unreachable!("root() unwraps stages"),
        }
    }
}
