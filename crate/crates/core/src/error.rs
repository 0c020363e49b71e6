use thiserror::Error;

/// Errors produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension disagreement between operands; the message names both shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration value is out of its documented range.
    #[error("invalid config: {0}")]
    Config(String),

    /// Malformed or inconsistent dataset contents.
    #[error("data error: {0}")]
    Data(String),

    /// Training diverged or was otherwise aborted; the message names the
    /// epoch/batch (and fold or search cell, when applicable).
    #[error("training aborted: {0}")]
    Training(String),

    /// Malformed persisted artifact (model file, config file, report).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Prefix the message with a stage name, preserving the variant.
    pub fn in_stage(self, stage: &str) -> Error {
        match self {
            Error::Shape(m) => Error::Shape(format!("{stage}: {m}")),
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{stage}: {m}")),
            Error::Config(m) => Error::Config(format!("{stage}: {m}")),
            Error::Data(m) => Error::Data(format!("{stage}: {m}")),
            Error::Training(m) => Error::Training(format!("{stage}: {m}")),
            Error::Parse(m) => Error::Parse(format!("{stage}: {m}")),
            Error::Io(e) => Error::Parse(format!("{stage}: io error: {e}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
