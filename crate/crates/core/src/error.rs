use thiserror::Error;

/// Errors surfaced by the engine. The CLI maps these onto exit codes, so the
/// distinction between configuration, data, and internal failures matters.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed category string; `offset` is the byte offset of the problem.
    #[error("category parse error at offset {offset}: {msg} in {input:?}")]
    CategoryParse {
        input: String,
        offset: usize,
        msg: String,
    },

    /// Bad configuration: missing parameter blocks, dimension mismatches,
    /// unusable option combinations.
    #[error("configuration error: {0}")]
    Config(String),

    /// Bad input data (corpus records, lexicon lines, supertag blocks).
    #[error("data error: {0}")]
    Data(String),

    /// A sentence cannot be decoded: OOV word without a policy, or a leaf
    /// category that the supertag table does not list.
    #[error("decode error: {0}")]
    Decode(String),

    /// A value left the numeric domain an operation requires.
    #[error("numeric domain error: {0}")]
    Numeric(String),

    /// Internal invariant failure; indicates a bug in the engine itself.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn data_at(path: &str, line: usize, msg: impl std::fmt::Display) -> Self {
        Error::Data(format!("{path}:{line}: {msg}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
