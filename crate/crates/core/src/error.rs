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

    #[error("{context}: line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("duplicate word `{0}`")]
    DuplicateWord(String),

    #[error("word `{word}` has a non-finite component")]
    NonFinite { word: String },

    #[error("word `{word}` has a zero-norm vector")]
    ZeroNorm { word: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("word `{0}` not found")]
    MissingWord(String),

    #[error("k = {k} out of range for a vocabulary of {vocab} words")]
    KOutOfRange { k: usize, vocab: usize },

    #[error("k mismatch: {0} vs {1}")]
    KMismatch(usize, usize),

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("vocabulary intersection is empty")]
    EmptyIntersection,

    #[error("clustering agreement is undefined: baseline clustering has no co-clustered pairs")]
    UndefinedAgreement,

    #[error("effect size is undefined for query `{0}`: pooled standard deviation is zero")]
    UndefinedEffectSize(String),

    #[error("in space `{space}`: {source}")]
    InSpace {
        space: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn in_space(space: impl Into<String>, source: Error) -> Self {
        Error::InSpace {
            space: space.into(),
            source: Box::new(source),
        }
    }

    /// True when the root cause is a filesystem failure.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::InSpace { source, .. } => source.is_io(),
            _ => false,
        }
    }

    /// Process exit code for the command-line front end: 2 for I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_io() {
            2
        } else {
            1
        }
    }
}
