use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("index out of range: dialogue {dialogue}, position {position}")]
    Index { dialogue: usize, position: usize },

    /// The corpus is not in the state an operation requires (e.g. untagged).
    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("unknown condition kind `{0}`")]
    UnknownCondition(String),

    #[error("duplicate condition kind `{0}` in template")]
    DuplicateCondition(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
