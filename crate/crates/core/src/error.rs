use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic bytes in model file")]
    BadMagic,

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("index ({row}, {col}) out of range for a grid of size {size}")]
    IndexOutOfRange { row: usize, col: usize, size: usize },

    #[error("invalid appearance count: matched {matched} of {total}")]
    InvalidCount { matched: usize, total: usize },

    #[error("token id {id} is outside the vocabulary of size {vocab_size}")]
    UnknownToken { id: usize, vocab_size: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),

    #[error("document {0:?} has no gold keyphrases field")]
    MissingGold(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("document {doc_id:?}: {source}")]
    InDocument {
        doc_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_doc(self, doc_id: &str) -> Self {
        Error::InDocument {
            doc_id: doc_id.to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input data rather than a broken invariant.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::InDocument { source, .. } => source.is_data_error(),
            Error::ShapeMismatch { .. } | Error::IndexOutOfRange { .. } => false,
            _ => true,
        }
    }
}
