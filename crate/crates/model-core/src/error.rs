use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    InvalidConfig(String),
    OddRotaryDim {
        d_rot: usize,
    },
    PositionOutOfRange {
        position: usize,
        max_positions: usize,
    },
    ShapeMismatch(String),
    TokenOutOfRange {
        id: u32,
        vocab_size: usize,
    },
    SequenceTooShort {
        len: usize,
    },
    NonFiniteInput(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            ModelError::OddRotaryDim { d_rot } => {
                write!(f, "rotary dimension {d_rot} must be even")
            }
            ModelError::PositionOutOfRange {
                position,
                max_positions,
            } => {
                write!(
                    f,
                    "position {position} exceeds max_positions {max_positions}"
                )
            }
            ModelError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            ModelError::TokenOutOfRange { id, vocab_size } => {
                write!(f, "token id {id} out of range for vocab size {vocab_size}")
            }
            ModelError::SequenceTooShort { len } => {
                write!(f, "need at least 2 tokens for next-token loss, got {len}")
            }
            ModelError::NonFiniteInput(msg) => write!(f, "non-finite input: {msg}"),
        }
    }
}

impl std::error::Error for ModelError {}
