use std::io;

use thiserror::Error;

/// Errors produced by the alignment toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("row {row} ({word}) has zero norm and cannot be normalized")]
    ZeroNorm { row: usize, word: String },

    #[error("no usable anchor pairs ({skipped} dictionary entries out of vocabulary)")]
    NoAnchors { skipped: usize },

    #[error("k = {k} exceeds pool size {pool}")]
    KTooLarge { k: usize, pool: usize },

    #[error("linear system is numerically singular")]
    Singular,

    #[error("singular value decomposition failed to converge")]
    SvdFailed,

    #[error("query word {0:?} has no entry in the gold dictionary")]
    QueryNotInGold(String),

    #[error("need {needed} unique source words, dictionary has {available}")]
    InsufficientWords { needed: usize, available: usize },

    #[error("no query word is covered by both vocabularies")]
    NoQueries,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
