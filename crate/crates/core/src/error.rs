use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported character {ch:?} in word {word:?}")]
    UnsupportedCharacter { word: String, ch: char },

    #[error("invalid word {0:?}: words must be non-empty and contain no whitespace")]
    InvalidWord(String),

    #[error("utterance is empty")]
    EmptyUtterance,

    #[error("phone {0} is not in the confusion-matrix inventory")]
    UnknownPhone(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("every attention position is masked")]
    NoCandidate,

    #[error("non-finite value in parameter {0}")]
    NonFinite(String),

    #[error("WER of the original is zero; WERR is undefined")]
    UndefinedWerr,

    #[error("reference is empty")]
    EmptyReference,

    #[error("normalizing sequence is empty")]
    EmptyNormalizer,

    #[error("lexicon has {found} words; at least {needed} are required")]
    LexiconTooSmall { found: usize, needed: usize },

    #[error("vocabulary has {found} words; at least {needed} are required")]
    VocabularyTooSmall { found: usize, needed: usize },

    #[error("corpus has no usable examples")]
    EmptyCorpus,

    #[error("corpus must contain both correction and non-correction pairs")]
    MissingClass,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unsupported corpus schema version {0}")]
    SchemaVersion(u32),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
