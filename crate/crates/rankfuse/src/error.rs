use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value is invalid.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Model identities or their order disagree between two inputs
    /// (e.g. a theta matrix and a prediction dataset).
    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    /// Malformed or inconsistent data (records, files, ids).
    #[error("data error: {0}")]
    Data(String),

    /// Tokenization hit a character no pattern alternative consumes.
    #[error("unexpected character {ch:?} at byte offset {offset}")]
    Tokenize { offset: usize, ch: char },

    /// A numerically degenerate situation: non-convergence, degenerate
    /// likelihood, or an optimization problem with nothing to optimize.
    #[error("degenerate: {0}")]
    Degenerate(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
