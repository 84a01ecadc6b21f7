//! Encode and decode against a [`TokenizerModel`].

use crate::error::DecodeError;
use crate::model::TokenizerModel;
use crate::pretokenize::{pretokenize, segment_material, SegmentKind};

impl TokenizerModel {
    /// Encode arbitrary bytes. Space runs map to their dedicated tokens;
    /// all other segments go through the learned merges. Total and
    /// deterministic.
    pub fn encode(&self, text: &[u8]) -> Vec<u32> {
        let segments = pretokenize(text);
        let mut ids = Vec::new();
        for (idx, seg) in segments.iter().enumerate() {
            match seg.kind {
                SegmentKind::SpaceRun => {
                    let id = self
                        .space_run_id(seg.bytes.len())
                        .expect("pretokenize caps runs at 24");
                    ids.push(id);
                }
                _ => {
                    let material = segment_material(seg, idx == 0);
                    self.encode_material(&material, &mut ids);
                }
            }
        }
        ids
    }

    /// Apply merges by rank within one segment's material.
    fn encode_material(&self, material: &[u8], out: &mut Vec<u32>) {
        let mut tokens: Vec<u32> = material.iter().map(|&b| b as u32).collect();
        loop {
            let mut best: Option<(u32, usize)> = None;
            for i in 0..tokens.len().saturating_sub(1) {
                if let Some(rank) = self.merge_rank(tokens[i], tokens[i + 1]) {
                    if best.is_none_or(|(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((rank, _)) = best else { break };
            let m = self.merges()[rank as usize];
            let mut merged = Vec::with_capacity(tokens.len());
            let mut i = 0;
            while i < tokens.len() {
                if i + 1 < tokens.len() && tokens[i] == m.left && tokens[i + 1] == m.right {
                    merged.push(m.out);
                    i += 2;
                } else {
                    merged.push(tokens[i]);
                    i += 1;
                }
            }
            tokens = merged;
        }
        out.extend_from_slice(&tokens);
    }

    /// Inverse of [`encode`](Self::encode) on its image: concatenates
    /// token bytes, stripping the virtual boundary space again. A
    /// sequence whose first token is a boundary-marked word renders with
    /// no leading space; literal leading whitespace is unaffected because
    /// it always encodes to space-run tokens.
    pub fn decode(&self, ids: &[u32]) -> Result<Vec<u8>, DecodeError> {
        let mut bytes = Vec::new();
        for (i, &id) in ids.iter().enumerate() {
            let material = self.token_bytes(id).ok_or(DecodeError::IdOutOfRange {
                id,
                bound: self.id_bounds(),
            })?;
            if i == 0 && !self.is_space_run(id) && material.first() == Some(&b' ') {
                bytes.extend_from_slice(&material[1..]);
            } else {
                bytes.extend_from_slice(material);
            }
        }
        Ok(bytes)
    }
}
