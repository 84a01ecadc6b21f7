//! BPE training over pretokenized segments.
//!
//! Pairs are counted within segment materials only, so no merge can span
//! a segment boundary. Tie-breaking and material ordering are fixed, so
//! two runs over the same corpus produce identical models.

use std::collections::{BTreeSet, HashMap};

use crate::error::TrainError;
use crate::model::{TokenizerModel, MAX_SPACE_RUN, NUM_BASE_TOKENS};
use crate::pretokenize::{pretokenize, segment_material, SegmentKind};

/// Outcome of a training run.
#[derive(Debug)]
pub struct TrainReport {
    pub model: TokenizerModel,
    /// Training stopped before the vocabulary target because no adjacent
    /// pair was left to merge.
    pub halted_early: bool,
    pub warnings: Vec<String>,
}

/// Train a tokenizer on `corpus` until `target_vocab` entries exist.
///
/// The vocabulary starts from 256 byte tokens, the 24 space-run tokens
/// and `reserved`, then grows one merge at a time: the most frequent
/// adjacent pair wins, ties going to the lexicographically smaller
/// `(left bytes, right bytes)`.
pub fn train_bpe(
    corpus: &[Vec<u8>],
    target_vocab: usize,
    reserved: &[Vec<u8>],
) -> Result<TrainReport, TrainError> {
    if corpus.is_empty() || corpus.iter().all(|d| d.is_empty()) {
        return Err(TrainError::EmptyCorpus);
    }
    let minimum = NUM_BASE_TOKENS as usize + MAX_SPACE_RUN + reserved.len();
    if target_vocab < minimum {
        return Err(TrainError::VocabTooSmall {
            requested: target_vocab,
            minimum,
        });
    }

    let mut model = TokenizerModel::with_reserved(reserved);

    // Distinct segment materials with frequencies, sorted for determinism.
    let mut freq_map: HashMap<Vec<u8>, u64> = HashMap::new();
    for doc in corpus {
        for (idx, seg) in pretokenize(doc).iter().enumerate() {
            if seg.kind == SegmentKind::SpaceRun {
                continue; // atomic, never merged
            }
            let material = segment_material(seg, idx == 0);
            *freq_map.entry(material).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(Vec<u8>, u64)> = freq_map.into_iter().collect();
    entries.sort();
    let mut materials: Vec<(Vec<u32>, u64)> = entries
        .into_iter()
        .map(|(bytes, freq)| (bytes.iter().map(|&b| b as u32).collect(), freq))
        .collect();

    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut occurs: HashMap<(u32, u32), BTreeSet<usize>> = HashMap::new();
    for (i, (tokens, freq)) in materials.iter().enumerate() {
        for w in tokens.windows(2) {
            let pair = (w[0], w[1]);
            *counts.entry(pair).or_insert(0) += freq;
            occurs.entry(pair).or_default().insert(i);
        }
    }

    let mut halted_early = false;
    let mut warnings = Vec::new();
    while model.vocab_size() < target_vocab {
        let Some(pair) = best_pair(&counts, &model) else {
            halted_early = true;
            warnings.push(format!(
                "no pairs left to merge after {} merges; vocab stops at {} of {} requested",
                model.merges().len(),
                model.vocab_size(),
                target_vocab
            ));
            break;
        };
        let new_id = model.push_merge(pair.0, pair.1);
        let touched: Vec<usize> = occurs
            .get(&pair)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        for mat_idx in touched {
            let (tokens, freq) = &mut materials[mat_idx];
            let freq = *freq;
            retract_pairs(tokens, freq, mat_idx, &mut counts, &mut occurs);
            merge_in_place(tokens, pair, new_id);
            contribute_pairs(tokens, freq, mat_idx, &mut counts, &mut occurs);
        }
    }

    Ok(TrainReport {
        model,
        halted_early,
        warnings,
    })
}

/// Highest-count pair; ties prefer the lexicographically smaller
/// `(left bytes, right bytes)`.
fn best_pair(counts: &HashMap<(u32, u32), u64>, model: &TokenizerModel) -> Option<(u32, u32)> {
    let max = counts.values().copied().max().filter(|&c| c > 0)?;
    counts
        .iter()
        .filter(|&(_, &c)| c == max)
        .map(|(&pair, _)| pair)
        .min_by(|a, b| {
            let ka = (
                model.token_bytes(a.0).unwrap(),
                model.token_bytes(a.1).unwrap(),
            );
            let kb = (
                model.token_bytes(b.0).unwrap(),
                model.token_bytes(b.1).unwrap(),
            );
            ka.cmp(&kb)
        })
}

fn retract_pairs(
    tokens: &[u32],
    freq: u64,
    mat_idx: usize,
    counts: &mut HashMap<(u32, u32), u64>,
    occurs: &mut HashMap<(u32, u32), BTreeSet<usize>>,
) {
    for w in tokens.windows(2) {
        let pair = (w[0], w[1]);
        if let Some(c) = counts.get_mut(&pair) {
            *c -= freq;
            if *c == 0 {
                counts.remove(&pair);
            }
        }
        if let Some(set) = occurs.get_mut(&pair) {
            set.remove(&mat_idx);
            if set.is_empty() {
                occurs.remove(&pair);
            }
        }
    }
}

fn contribute_pairs(
    tokens: &[u32],
    freq: u64,
    mat_idx: usize,
    counts: &mut HashMap<(u32, u32), u64>,
    occurs: &mut HashMap<(u32, u32), BTreeSet<usize>>,
) {
    for w in tokens.windows(2) {
        let pair = (w[0], w[1]);
        *counts.entry(pair).or_insert(0) += freq;
        occurs.entry(pair).or_default().insert(mat_idx);
    }
}

/// Replace non-overlapping occurrences of `pair`, leftmost first.
fn merge_in_place(tokens: &mut Vec<u32>, pair: (u32, u32), new_id: u32) {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() && tokens[i] == pair.0 && tokens[i + 1] == pair.1 {
            out.push(new_id);
            i += 2;
        } else {
            out.push(tokens[i]);
            i += 1;
        }
    }
    *tokens = out;
}
