use std::collections::HashMap;

/// Number of single-byte base tokens; they occupy ids `0..256`.
pub const NUM_BASE_TOKENS: u32 = 256;

/// Longest run of spaces that maps to a single dedicated token.
pub const MAX_SPACE_RUN: usize = 24;

/// One learned merge rule: `left` followed by `right` rewrites to `out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Merge {
    pub left: u32,
    pub right: u32,
    pub out: u32,
}

/// A trained tokenizer: dense vocabulary, ordered merges and the 24
/// space-run tokens.
///
/// Id layout is fixed: `0..256` base bytes, then the 24 space-run tokens,
/// then reserved tokens, then one id per learned merge in creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerModel {
    vocab: Vec<Vec<u8>>,
    merges: Vec<Merge>,
    space_run_ids: [u32; MAX_SPACE_RUN],
    num_reserved: u32,
    merge_ranks: HashMap<(u32, u32), u32>,
}

impl TokenizerModel {
    /// Model with base bytes, space-run tokens and the given reserved
    /// tokens, but no merges yet.
    pub fn with_reserved(reserved: &[Vec<u8>]) -> Self {
        let mut vocab: Vec<Vec<u8>> = (0u32..NUM_BASE_TOKENS).map(|b| vec![b as u8]).collect();
        let mut space_run_ids = [0u32; MAX_SPACE_RUN];
        for k in 1..=MAX_SPACE_RUN {
            space_run_ids[k - 1] = vocab.len() as u32;
            vocab.push(vec![b' '; k]);
        }
        for r in reserved {
            vocab.push(r.clone());
        }
        TokenizerModel {
            vocab,
            merges: Vec::new(),
            space_run_ids,
            num_reserved: reserved.len() as u32,
            merge_ranks: HashMap::new(),
        }
    }

    /// Base model: 256 byte tokens plus the 24 space-run tokens.
    pub fn base() -> Self {
        Self::with_reserved(&[])
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Upper bound on valid token ids.
    pub fn id_bounds(&self) -> u32 {
        self.vocab.len() as u32
    }

    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.vocab.get(id as usize).map(|v| v.as_slice())
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn num_reserved(&self) -> u32 {
        self.num_reserved
    }

    /// Token id for a run of `k` spaces, `1 <= k <= 24`.
    pub fn space_run_id(&self, k: usize) -> Option<u32> {
        if (1..=MAX_SPACE_RUN).contains(&k) {
            Some(self.space_run_ids[k - 1])
        } else {
            None
        }
    }

    pub fn is_space_run(&self, id: u32) -> bool {
        self.space_run_ids.contains(&id)
    }

    pub(crate) fn merge_rank(&self, left: u32, right: u32) -> Option<u32> {
        self.merge_ranks.get(&(left, right)).copied()
    }

    /// Append a merge, creating its output token. Used by training and by
    /// the model-file loader; both keep the creation-order invariant.
    pub(crate) fn push_merge(&mut self, left: u32, right: u32) -> u32 {
        let out = self.vocab.len() as u32;
        let mut bytes = self.vocab[left as usize].clone();
        bytes.extend_from_slice(&self.vocab[right as usize]);
        self.vocab.push(bytes);
        self.merge_ranks
            .insert((left, right), self.merges.len() as u32);
        self.merges.push(Merge { left, right, out });
        out
    }

    pub(crate) fn from_parts(
        vocab: Vec<Vec<u8>>,
        merges: Vec<Merge>,
        space_run_ids: [u32; MAX_SPACE_RUN],
        num_reserved: u32,
    ) -> Self {
        let merge_ranks = merges
            .iter()
            .enumerate()
            .map(|(rank, m)| ((m.left, m.right), rank as u32))
            .collect();
        TokenizerModel {
            vocab,
            merges,
            space_run_ids,
            num_reserved,
            merge_ranks,
        }
    }

    /// Check the structural invariants: dense ids, byte-token prefix, all
    /// 24 distinct space runs, and merges forming a valid creation order.
    pub fn validate(&self) -> Result<(), String> {
        for b in 0..NUM_BASE_TOKENS {
            if self.vocab[b as usize] != [b as u8] {
                return Err(format!("vocab id {b} is not the base byte token"));
            }
        }
        let mut seen = [false; MAX_SPACE_RUN];
        for k in 1..=MAX_SPACE_RUN {
            let id = self.space_run_ids[k - 1];
            let bytes = self
                .token_bytes(id)
                .ok_or_else(|| format!("space-run id {id} out of range"))?;
            if bytes != vec![b' '; k].as_slice() {
                return Err(format!("space-run id {id} does not hold {k} spaces"));
            }
            if seen[k - 1] {
                return Err(format!("duplicate space-run token for length {k}"));
            }
            seen[k - 1] = true;
        }
        let first_merge_out = NUM_BASE_TOKENS as usize + MAX_SPACE_RUN + self.num_reserved as usize;
        for (i, m) in self.merges.iter().enumerate() {
            let expect = (first_merge_out + i) as u32;
            if m.out != expect {
                return Err(format!(
                    "merge {i} creates id {} but {expect} expected",
                    m.out
                ));
            }
            if m.left >= m.out || m.right >= m.out {
                return Err(format!("merge {i} references a token created later"));
            }
            let mut cat = self.vocab[m.left as usize].clone();
            cat.extend_from_slice(&self.vocab[m.right as usize]);
            if cat != self.vocab[m.out as usize] {
                return Err(format!("merge {i} output bytes do not match its parts"));
            }
        }
        if self.vocab.len() != first_merge_out + self.merges.len() {
            return Err("vocab size does not match base + specials + merges".into());
        }
        Ok(())
    }
}
