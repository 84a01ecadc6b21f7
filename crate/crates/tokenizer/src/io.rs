//! Text model file: `neox-tok v1 <vocab_size>` header, one vocab entry
//! per line as `<id>\t<hex-escaped bytes>`, a `#MERGES` delimiter, then
//! one merge per line as `<left_id> <right_id> <new_id>`.
//!
//! Escaping: printable ASCII except backslash is written verbatim;
//! everything else (including space, tab, newline and backslash) as
//! lowercase `\xNN`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::ModelFileError;
use crate::model::{Merge, TokenizerModel, MAX_SPACE_RUN, NUM_BASE_TOKENS};

pub(crate) fn escape_bytes(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len());
    for &b in bytes {
        if (0x21..=0x7e).contains(&b) && b != b'\\' {
            s.push(b as char);
        } else {
            s.push_str(&format!("\\x{b:02x}"));
        }
    }
    s
}

pub(crate) fn unescape_bytes(s: &str) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(s.len());
    let raw = s.as_bytes();
    let mut i = 0;
    while i < raw.len() {
        if raw[i] == b'\\' {
            if i + 3 >= raw.len() || raw[i + 1] != b'x' {
                return None;
            }
            let hex = std::str::from_utf8(&raw[i + 2..i + 4]).ok()?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 4;
        } else {
            out.push(raw[i]);
            i += 1;
        }
    }
    Some(out)
}

impl TokenizerModel {
    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), ModelFileError> {
        writeln!(w, "neox-tok v1 {}", self.vocab_size())?;
        for id in 0..self.id_bounds() {
            let bytes = self.token_bytes(id).expect("dense vocab");
            writeln!(w, "{id}\t{}", escape_bytes(bytes))?;
        }
        writeln!(w, "#MERGES")?;
        for m in self.merges() {
            writeln!(w, "{} {} {}", m.left, m.right, m.out)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, ModelFileError> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines().enumerate();

        let (_, header) = lines.next().ok_or_else(|| ModelFileError::Malformed {
            line: 1,
            reason: "empty file".into(),
        })?;
        let header = header?;
        let mut parts = header.split_whitespace();
        let (magic, version, size) = (parts.next(), parts.next(), parts.next());
        if magic != Some("neox-tok") || version != Some("v1") {
            return Err(ModelFileError::Malformed {
                line: 1,
                reason: format!("expected `neox-tok v1 <vocab_size>`, got `{header}`"),
            });
        }
        let vocab_size: usize =
            size.and_then(|s| s.parse().ok())
                .ok_or_else(|| ModelFileError::Malformed {
                    line: 1,
                    reason: "unreadable vocab size".into(),
                })?;

        let mut vocab: Vec<Vec<u8>> = Vec::with_capacity(vocab_size);
        let mut merges_seen = false;
        let mut merges: Vec<Merge> = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            if line == "#MERGES" {
                merges_seen = true;
                continue;
            }
            if !merges_seen {
                let (id_part, bytes_part) =
                    line.split_once('\t')
                        .ok_or_else(|| ModelFileError::Malformed {
                            line: lineno,
                            reason: "vocab line needs `<id>\\t<bytes>`".into(),
                        })?;
                let id: usize = id_part.parse().map_err(|_| ModelFileError::Malformed {
                    line: lineno,
                    reason: format!("bad token id `{id_part}`"),
                })?;
                if id != vocab.len() {
                    return Err(ModelFileError::Malformed {
                        line: lineno,
                        reason: format!("token id {id} out of order, expected {}", vocab.len()),
                    });
                }
                let bytes =
                    unescape_bytes(bytes_part).ok_or_else(|| ModelFileError::Malformed {
                        line: lineno,
                        reason: "bad byte escape".into(),
                    })?;
                vocab.push(bytes);
            } else {
                let nums: Vec<&str> = line.split_whitespace().collect();
                if nums.len() != 3 {
                    return Err(ModelFileError::Malformed {
                        line: lineno,
                        reason: "merge line needs `<left> <right> <new>`".into(),
                    });
                }
                let parse = |s: &str| -> Result<u32, ModelFileError> {
                    s.parse().map_err(|_| ModelFileError::Malformed {
                        line: lineno,
                        reason: format!("bad merge id `{s}`"),
                    })
                };
                let (left, right, out) = (parse(nums[0])?, parse(nums[1])?, parse(nums[2])?);
                for id in [left, right, out] {
                    if id as usize >= vocab.len() {
                        return Err(ModelFileError::Malformed {
                            line: lineno,
                            reason: format!("merge references unknown token {id}"),
                        });
                    }
                }
                if left >= out || right >= out {
                    return Err(ModelFileError::Malformed {
                        line: lineno,
                        reason: format!("merge output {out} does not come after its parts"),
                    });
                }
                let mut cat = vocab[left as usize].clone();
                cat.extend_from_slice(&vocab[right as usize]);
                if cat != vocab[out as usize] {
                    return Err(ModelFileError::Malformed {
                        line: lineno,
                        reason: format!("merge output {out} bytes do not match left+right"),
                    });
                }
                merges.push(Merge { left, right, out });
            }
        }
        if vocab.len() != vocab_size {
            return Err(ModelFileError::Malformed {
                line: 1,
                reason: format!(
                    "header claims {vocab_size} tokens, file has {}",
                    vocab.len()
                ),
            });
        }
        if (vocab.len() as u32) < NUM_BASE_TOKENS {
            return Err(ModelFileError::Malformed {
                line: 1,
                reason: "vocab smaller than the 256 base byte tokens".into(),
            });
        }
        for b in 0..NUM_BASE_TOKENS as usize {
            if vocab[b] != [b as u8] {
                return Err(ModelFileError::Malformed {
                    line: b + 2,
                    reason: format!("id {b} must be the base byte token for byte {b}"),
                });
            }
        }

        // Recover space-run ids: entries at or above id 256 holding only
        // spaces, one per length 1..=24.
        let mut space_run_ids = [u32::MAX; MAX_SPACE_RUN];
        for (id, bytes) in vocab.iter().enumerate().skip(NUM_BASE_TOKENS as usize) {
            if !bytes.is_empty() && bytes.iter().all(|&b| b == b' ') && bytes.len() <= MAX_SPACE_RUN
            {
                space_run_ids[bytes.len() - 1] = id as u32;
            }
        }
        let missing: Vec<usize> = (1..=MAX_SPACE_RUN)
            .filter(|&k| space_run_ids[k - 1] == u32::MAX)
            .collect();
        if !missing.is_empty() {
            return Err(ModelFileError::MissingSpaceRuns { lengths: missing });
        }

        let first_merge_out = merges.first().map(|m| m.out).unwrap_or(vocab.len() as u32);
        let num_reserved = first_merge_out
            .checked_sub(NUM_BASE_TOKENS + MAX_SPACE_RUN as u32)
            .ok_or_else(|| ModelFileError::Malformed {
                line: 1,
                reason: "merge outputs overlap base or space-run ids".into(),
            })?;

        let model = TokenizerModel::from_parts(vocab, merges, space_run_ids, num_reserved);
        model
            .validate()
            .map_err(|reason| ModelFileError::Malformed { line: 1, reason })?;
        Ok(model)
    }
}
