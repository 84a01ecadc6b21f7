use std::fmt;

/// Errors from [`crate::train_bpe`].
#[derive(Debug)]
pub enum TrainError {
    /// The corpus contained no documents.
    EmptyCorpus,
    /// Requested vocabulary is smaller than base bytes + space runs + reserved.
    VocabTooSmall { requested: usize, minimum: usize },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyCorpus => write!(f, "training corpus is empty"),
            TrainError::VocabTooSmall { requested, minimum } => write!(
                f,
                "target vocab {requested} is below the minimum of {minimum} \
                 (256 base bytes + 24 space-run tokens + reserved tokens)"
            ),
        }
    }
}

impl std::error::Error for TrainError {}

/// Errors from [`crate::TokenizerModel::decode`].
#[derive(Debug)]
pub enum DecodeError {
    /// A token id at or beyond the vocabulary bound.
    IdOutOfRange { id: u32, bound: u32 },
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::IdOutOfRange { id, bound } => {
                write!(f, "token id {id} out of range (vocab size {bound})")
            }
        }
    }
}

impl std::error::Error for DecodeError {}

/// Errors from reading or validating a tokenizer model file.
#[derive(Debug)]
pub enum ModelFileError {
    Io(std::io::Error),
    /// Structural problem at a specific line of the file (1-based).
    Malformed {
        line: usize,
        reason: String,
    },
    /// One or more of the 24 space-run tokens is absent.
    MissingSpaceRuns {
        lengths: Vec<usize>,
    },
}

impl fmt::Display for ModelFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelFileError::Io(e) => write!(f, "io error: {e}"),
            ModelFileError::Malformed { line, reason } => {
                write!(f, "malformed model file at line {line}: {reason}")
            }
            ModelFileError::MissingSpaceRuns { lengths } => {
                write!(
                    f,
                    "model file is missing space-run tokens for lengths {lengths:?}"
                )
            }
        }
    }
}

impl std::error::Error for ModelFileError {}

impl From<std::io::Error> for ModelFileError {
    fn from(e: std::io::Error) -> Self {
        ModelFileError::Io(e)
    }
}
