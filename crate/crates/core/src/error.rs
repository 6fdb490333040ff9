use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// A click model, policy or experiment is configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed text input. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A caller broke the step protocol, e.g. returned the wrong number of
    /// click flags for a displayed ranking.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
