use crate::crypto::BlockName;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("block not found: {0}")]
    NotFound(BlockName),

    #[error("integrity mismatch: expected {expected}, got {actual}")]
    Integrity {
        expected: BlockName,
        actual: BlockName,
    },

    #[error("bad block size: expected {expected} bytes, got {actual}")]
    BlockSize { expected: usize, actual: usize },

    #[error("content of {len} bytes exceeds block capacity {capacity}")]
    Oversize { len: usize, capacity: usize },

    #[error("malformed {what}: {detail}")]
    Malformed {
        what: &'static str,
        detail: String,
    },

    #[error("range {offset}+{len} out of bounds for object of size {size}")]
    OutOfRange { offset: u64, len: u64, size: u64 },

    #[error("range overlaps redacted content")]
    Redacted,

    #[error("reference to {0} carries no key")]
    Unreadable(BlockName),

    #[error("authentication failed")]
    Auth,

    #[error("no such entry: {0}")]
    NoEntry(String),

    #[error("entry already exists: {0}")]
    Exists(String),

    #[error("invalid name: {0:?}")]
    InvalidName(String),

    #[error("not a directory: {0}")]
    NotADirectory(String),

    #[error("not a file: {0}")]
    NotAFile(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("server error: {0}")]
    Server(String),
}

impl Error {
    pub(crate) fn malformed(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Malformed {
            what,
            detail: detail.into(),
        }
    }

    /// True for errors that indicate absence rather than failure.
    pub fn is_not_found(&self) -> bool {
        matches!(self, Error::NotFound(_) | Error::NoEntry(_))
    }
}
