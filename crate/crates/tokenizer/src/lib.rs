//! Byte-level BPE tokenizer with two whitespace changes relative to the
//! GPT-2 family:
//!
//! - dedicated vocabulary entries for runs of 1..=24 spaces, so indented
//!   text (source code, LaTeX) costs far fewer tokens;
//! - consistent space delimitation: a word at the start of a string
//!   tokenizes exactly like the same word after a single mid-string space,
//!   removing the prefix-space inconsistency of GPT-2 tokenizers.
//!
//! Encoding works on raw bytes. Every input round-trips through
//! `decode(encode(t)) == t`; the start-of-string boundary is carried by a
//! virtual leading space that `decode` strips again (it can tell the
//! virtual space apart from a literal one because literal leading
//! whitespace always encodes to a space-run token).

#![allow(clippy::needless_range_loop)]

mod codec;
mod error;
mod io;
mod model;
mod pretokenize;
mod train;

pub use error::{DecodeError, ModelFileError, TrainError};
pub use model::{Merge, TokenizerModel, MAX_SPACE_RUN, NUM_BASE_TOKENS};
pub use pretokenize::{pretokenize, Segment, SegmentKind};
pub use train::{train_bpe, TrainReport};
