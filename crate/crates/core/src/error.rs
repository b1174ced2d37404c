use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("signature error: {0}")]
    Signature(String),

    #[error("no such position: {0}")]
    Position(String),

    #[error("invalid theory: {0}")]
    Theory(String),

    #[error("invalid automaton: {0}")]
    Automaton(String),

    #[error("invalid run: {0}")]
    Run(String),

    #[error("invalid pumping plan: {0}")]
    Plan(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("budget exceeded: {what} (limit {limit})")]
    Budget { what: &'static str, limit: usize },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
