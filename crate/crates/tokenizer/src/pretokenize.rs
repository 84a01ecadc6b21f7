//! Segment grammar applied before any BPE merge.
//!
//! Segments partition the input bytes exactly. Merges are learned and
//! applied strictly within a segment, so the grammar is what actually
//! fixes the whitespace semantics:
//!
//! - maximal runs of 2+ spaces (and any leading run, even of one space)
//!   become space-run segments, greedily chunked to at most 24 spaces;
//! - every newline is its own segment;
//! - words are maximal alphanumeric runs, punctuation and symbols are
//!   maximal runs of their class;
//! - a single mid-string space before a word or punctuation run is
//!   absorbed into that segment, giving the GPT-2-style " word" tokens.

use crate::model::MAX_SPACE_RUN;

/// Character class of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Word,
    SpaceRun,
    Punctuation,
    Newline,
    Other,
}

/// One pretokenization unit. Concatenating `bytes` over all segments in
/// order reproduces the input exactly; an absorbed leading space is part
/// of `bytes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub bytes: Vec<u8>,
    pub kind: SegmentKind,
    /// Preceded by whitespace or string start.
    pub word_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UnitClass {
    Space,
    Newline,
    Word,
    Punct,
    Other,
}

/// Decode one scan unit at `input[i..]`: a code point when the bytes form
/// valid UTF-8, otherwise a single byte classed as `Other`.
fn unit_at(input: &[u8], i: usize) -> (UnitClass, usize) {
    let b = input[i];
    match b {
        b' ' => return (UnitClass::Space, 1),
        b'\n' => return (UnitClass::Newline, 1),
        b'\t' | b'\r' => return (UnitClass::Punct, 1),
        _ => {}
    }
    let width = match b {
        0x00..=0x7F => 1,
        0xC2..=0xDF => 2,
        0xE0..=0xEF => 3,
        0xF0..=0xF4 => 4,
        _ => return (UnitClass::Other, 1),
    };
    if i + width > input.len() {
        return (UnitClass::Other, 1);
    }
    let Ok(s) = std::str::from_utf8(&input[i..i + width]) else {
        return (UnitClass::Other, 1);
    };
    let c = s.chars().next().expect("validated non-empty");
    if c.is_alphanumeric() {
        (UnitClass::Word, width)
    } else if c.is_control() {
        (UnitClass::Other, width)
    } else if c.is_ascii_punctuation() || !c.is_whitespace() {
        // ASCII punctuation plus general symbols; non-space Unicode
        // whitespace lands in Other.
        (UnitClass::Punct, width)
    } else {
        (UnitClass::Other, width)
    }
}

fn boundary_at(input: &[u8], pos: usize) -> bool {
    pos == 0 || matches!(input[pos - 1], b' ' | b'\n')
}

/// Split raw bytes into segments. Total function: any byte sequence,
/// UTF-8 or not, yields segments whose bytes concatenate back to the
/// input.
pub fn pretokenize(input: &[u8]) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut i = 0usize;
    // Set when a single mid-string space is deferred into the next segment.
    let mut absorbed_space = false;
    while i < input.len() {
        let (class, width) = unit_at(input, i);
        match class {
            UnitClass::Space => {
                debug_assert!(!absorbed_space);
                let mut j = i + 1;
                while j < input.len() && input[j] == b' ' {
                    j += 1;
                }
                let run = j - i;
                let absorb = run == 1 && i > 0 && j < input.len() && input[j] != b'\n';
                if absorb {
                    absorbed_space = true;
                    i = j;
                    continue;
                }
                let mut chunk_start = i;
                while chunk_start < j {
                    let chunk = (j - chunk_start).min(MAX_SPACE_RUN);
                    segments.push(Segment {
                        bytes: vec![b' '; chunk],
                        kind: SegmentKind::SpaceRun,
                        word_boundary: boundary_at(input, chunk_start),
                    });
                    chunk_start += chunk;
                }
                i = j;
            }
            UnitClass::Newline => {
                debug_assert!(!absorbed_space);
                segments.push(Segment {
                    bytes: vec![b'\n'],
                    kind: SegmentKind::Newline,
                    word_boundary: boundary_at(input, i),
                });
                i += width;
            }
            UnitClass::Word | UnitClass::Punct | UnitClass::Other => {
                let seg_start = i;
                let mut j = i + width;
                while j < input.len() {
                    let (next_class, next_width) = unit_at(input, j);
                    if next_class != class {
                        break;
                    }
                    j += next_width;
                }
                let bytes_start = if absorbed_space {
                    seg_start - 1
                } else {
                    seg_start
                };
                segments.push(Segment {
                    bytes: input[bytes_start..j].to_vec(),
                    kind: match class {
                        UnitClass::Word => SegmentKind::Word,
                        UnitClass::Punct => SegmentKind::Punctuation,
                        _ => SegmentKind::Other,
                    },
                    word_boundary: absorbed_space || boundary_at(input, seg_start),
                });
                absorbed_space = false;
                i = j;
            }
        }
    }
    segments
}

/// Byte material a segment feeds into the BPE stage. The first segment of
/// a string, when it is not whitespace, gains a virtual leading space so
/// that start-of-string words share the space-prefixed token forms.
pub(crate) fn segment_material(segment: &Segment, is_first: bool) -> Vec<u8> {
    match segment.kind {
        SegmentKind::SpaceRun | SegmentKind::Newline => segment.bytes.clone(),
        _ => {
            if is_first {
                debug_assert!(!segment.bytes.starts_with(b" "));
                let mut m = Vec::with_capacity(segment.bytes.len() + 1);
                m.push(b' ');
                m.extend_from_slice(&segment.bytes);
                m
            } else {
                segment.bytes.clone()
            }
        }
    }
}
