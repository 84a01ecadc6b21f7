//! The language model: embedding, parallel blocks, final layer norm and
//! an untied output projection.

use crate::block::{gelu, layer_norm_cached, Block, LayerNorm};
use crate::config::{ModelConfig, ParamCounts};
use crate::error::ModelError;
use crate::math::{add_assign, dot, log_softmax, mat_vec, softmax, Matrix, NormalSampler};
use crate::rotary::{rotate_in_place, RotaryCache};

/// Initialization / decay class of a parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// General weight matrices: std `sqrt(2/(5d))`.
    WeightSmall,
    /// Output layers feeding the residual (attention output, FF down):
    /// std `2/(L*sqrt(d))`.
    WeightWang,
    /// Zero-initialized vectors.
    Bias,
    /// One-initialized layer-norm gains.
    Gain,
}

impl ParamKind {
    /// Weight decay applies to matrices only.
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::WeightSmall | ParamKind::WeightWang)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LMModel {
    pub config: ModelConfig,
    /// vocab x d input embedding.
    pub embedding: Matrix,
    pub blocks: Vec<Block>,
    pub final_ln: LayerNorm,
    /// vocab x d output projection rows; distinct tensor from the input
    /// embedding (no weight tying).
    pub output_proj: Matrix,
    pub rotary: RotaryCache,
}

impl LMModel {
    /// All-zero parameters (layer-norm gains included): the uniform-logit
    /// model, and the container shape used for gradients and moments.
    pub fn zeros(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let d = config.hidden_size;
        let rotary = RotaryCache::new(
            config.rotary_dims(),
            config.rotary_base,
            config.max_positions,
        )?;
        Ok(LMModel {
            config: config.clone(),
            embedding: Matrix::zeros(config.vocab_size, d),
            blocks: (0..config.num_layers)
                .map(|_| Block::zeros(d, config.num_heads))
                .collect(),
            final_ln: LayerNorm {
                gain: vec![0.0; d],
                bias: vec![0.0; d],
            },
            output_proj: Matrix::zeros(config.vocab_size, d),
            rotary,
        })
    }

    /// Same shapes as `self`, all values zero.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config).expect("config validated at construction")
    }

    /// Every parameter tensor with its name and class, fixed order.
    pub fn params(&self) -> Vec<(String, ParamKind, &[f64])> {
        let mut out: Vec<(String, ParamKind, &[f64])> = Vec::new();
        out.push((
            "embedding".into(),
            ParamKind::WeightSmall,
            &self.embedding.data,
        ));
        for (i, b) in self.blocks.iter().enumerate() {
            let name = |field: &str| format!("blocks.{i}.{field}");
            out.push((name("ln1.gain"), ParamKind::Gain, &b.ln1.gain));
            out.push((name("ln1.bias"), ParamKind::Bias, &b.ln1.bias));
            out.push((name("ln2.gain"), ParamKind::Gain, &b.ln2.gain));
            out.push((name("ln2.bias"), ParamKind::Bias, &b.ln2.bias));
            out.push((name("w_q"), ParamKind::WeightSmall, &b.w_q.data));
            out.push((name("b_q"), ParamKind::Bias, &b.b_q));
            out.push((name("w_k"), ParamKind::WeightSmall, &b.w_k.data));
            out.push((name("b_k"), ParamKind::Bias, &b.b_k));
            out.push((name("w_v"), ParamKind::WeightSmall, &b.w_v.data));
            out.push((name("b_v"), ParamKind::Bias, &b.b_v));
            out.push((name("w_o"), ParamKind::WeightWang, &b.w_o.data));
            out.push((name("b_o"), ParamKind::Bias, &b.b_o));
            out.push((name("ff_up"), ParamKind::WeightSmall, &b.ff_up.data));
            out.push((name("ff_up_bias"), ParamKind::Bias, &b.ff_up_bias));
            out.push((name("ff_down"), ParamKind::WeightWang, &b.ff_down.data));
            out.push((name("ff_down_bias"), ParamKind::Bias, &b.ff_down_bias));
        }
        out.push(("final_ln.gain".into(), ParamKind::Gain, &self.final_ln.gain));
        out.push(("final_ln.bias".into(), ParamKind::Bias, &self.final_ln.bias));
        out.push((
            "output_proj".into(),
            ParamKind::WeightSmall,
            &self.output_proj.data,
        ));
        out
    }

    /// Mutable variant of [`params`](Self::params), same order.
    pub fn params_mut(&mut self) -> Vec<(String, ParamKind, &mut [f64])> {
        let mut out: Vec<(String, ParamKind, &mut [f64])> = Vec::new();
        out.push((
            "embedding".into(),
            ParamKind::WeightSmall,
            self.embedding.data.as_mut_slice(),
        ));
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let name = |field: &str| format!("blocks.{i}.{field}");
            out.push((name("ln1.gain"), ParamKind::Gain, b.ln1.gain.as_mut_slice()));
            out.push((name("ln1.bias"), ParamKind::Bias, b.ln1.bias.as_mut_slice()));
            out.push((name("ln2.gain"), ParamKind::Gain, b.ln2.gain.as_mut_slice()));
            out.push((name("ln2.bias"), ParamKind::Bias, b.ln2.bias.as_mut_slice()));
            out.push((
                name("w_q"),
                ParamKind::WeightSmall,
                b.w_q.data.as_mut_slice(),
            ));
            out.push((name("b_q"), ParamKind::Bias, b.b_q.as_mut_slice()));
            out.push((
                name("w_k"),
                ParamKind::WeightSmall,
                b.w_k.data.as_mut_slice(),
            ));
            out.push((name("b_k"), ParamKind::Bias, b.b_k.as_mut_slice()));
            out.push((
                name("w_v"),
                ParamKind::WeightSmall,
                b.w_v.data.as_mut_slice(),
            ));
            out.push((name("b_v"), ParamKind::Bias, b.b_v.as_mut_slice()));
            out.push((
                name("w_o"),
                ParamKind::WeightWang,
                b.w_o.data.as_mut_slice(),
            ));
            out.push((name("b_o"), ParamKind::Bias, b.b_o.as_mut_slice()));
            out.push((
                name("ff_up"),
                ParamKind::WeightSmall,
                b.ff_up.data.as_mut_slice(),
            ));
            out.push((
                name("ff_up_bias"),
                ParamKind::Bias,
                b.ff_up_bias.as_mut_slice(),
            ));
            out.push((
                name("ff_down"),
                ParamKind::WeightWang,
                b.ff_down.data.as_mut_slice(),
            ));
            out.push((
                name("ff_down_bias"),
                ParamKind::Bias,
                b.ff_down_bias.as_mut_slice(),
            ));
        }
        out.push((
            "final_ln.gain".into(),
            ParamKind::Gain,
            self.final_ln.gain.as_mut_slice(),
        ));
        out.push((
            "final_ln.bias".into(),
            ParamKind::Bias,
            self.final_ln.bias.as_mut_slice(),
        ));
        out.push((
            "output_proj".into(),
            ParamKind::WeightSmall,
            self.output_proj.data.as_mut_slice(),
        ));
        out
    }

    /// Visit every parameter tensor in a fixed order.
    pub fn for_each_param(&self, mut f: impl FnMut(&str, ParamKind, &[f64])) {
        for (name, kind, data) in self.params() {
            f(&name, kind, data);
        }
    }

    /// Mutable variant of [`for_each_param`](Self::for_each_param), same
    /// visit order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&str, ParamKind, &mut [f64])) {
        for (name, kind, data) in self.params_mut() {
            f(&name, kind, data);
        }
    }

    pub fn num_params(&self) -> u64 {
        let mut n = 0u64;
        self.for_each_param(|_, _, data| n += data.len() as u64);
        n
    }

    fn check_ids(&self, ids: &[u32]) -> Result<(), ModelError> {
        for &id in ids {
            if id as usize >= self.config.vocab_size {
                return Err(ModelError::TokenOutOfRange {
                    id,
                    vocab_size: self.config.vocab_size,
                });
            }
        }
        Ok(())
    }

    /// Full forward pass with the caches backpropagation needs.
    pub fn forward(&self, ids: &[u32]) -> Result<ForwardPass, ModelError> {
        self.check_ids(ids)?;
        let t_len = ids.len();
        if t_len > self.config.max_positions {
            return Err(ModelError::PositionOutOfRange {
                position: t_len - 1,
                max_positions: self.config.max_positions,
            });
        }
        let d = self.config.hidden_size;
        let num_heads = self.config.num_heads;
        let head_dim = d / num_heads;
        let scale = 1.0 / (head_dim as f64).sqrt();

        let mut x: Vec<Vec<f64>> = ids
            .iter()
            .map(|&id| self.embedding.row(id as usize).to_vec())
            .collect();

        let mut layers = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let x_in = std::mem::take(&mut x);
            let mut ln1_norm = Vec::with_capacity(t_len);
            let mut ln1_inv = Vec::with_capacity(t_len);
            let mut ln1_out = Vec::with_capacity(t_len);
            let mut ln2_norm = Vec::with_capacity(t_len);
            let mut ln2_inv = Vec::with_capacity(t_len);
            let mut ln2_out = Vec::with_capacity(t_len);
            for row in &x_in {
                let (o, n, inv) = layer_norm_cached(row, &block.ln1);
                ln1_out.push(o);
                ln1_norm.push(n);
                ln1_inv.push(inv);
                let (o, n, inv) = layer_norm_cached(row, &block.ln2);
                ln2_out.push(o);
                ln2_norm.push(n);
                ln2_inv.push(inv);
            }

            let project = |w: &Matrix, b: &[f64]| -> Vec<Vec<f64>> {
                ln1_out
                    .iter()
                    .map(|row| {
                        let mut v = mat_vec(w, row);
                        add_assign(&mut v, b);
                        v
                    })
                    .collect()
            };
            let q_pre = project(&block.w_q, &block.b_q);
            let k_pre = project(&block.w_k, &block.b_k);
            let v = project(&block.w_v, &block.b_v);

            let mut q_rot = q_pre.clone();
            let mut k_rot = k_pre.clone();
            for t in 0..t_len {
                for h in 0..num_heads {
                    let lo = h * head_dim;
                    rotate_in_place(&mut q_rot[t][lo..lo + head_dim], t, &self.rotary, false);
                    rotate_in_place(&mut k_rot[t][lo..lo + head_dim], t, &self.rotary, false);
                }
            }

            // probs[h][t] has length t+1 (causal).
            let mut probs: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(t_len); num_heads];
            let mut ctx = vec![vec![0.0; d]; t_len];
            for h in 0..num_heads {
                let lo = h * head_dim;
                let hi = lo + head_dim;
                for t in 0..t_len {
                    let mut scores = Vec::with_capacity(t + 1);
                    for u in 0..=t {
                        scores.push(dot(&q_rot[t][lo..hi], &k_rot[u][lo..hi]) * scale);
                    }
                    let p = softmax(&scores);
                    for (u, &pu) in p.iter().enumerate() {
                        for i in lo..hi {
                            ctx[t][i] += pu * v[u][i];
                        }
                    }
                    probs[h].push(p);
                }
            }

            let attn_out: Vec<Vec<f64>> = ctx
                .iter()
                .map(|c| {
                    let mut o = mat_vec(&block.w_o, c);
                    add_assign(&mut o, &block.b_o);
                    o
                })
                .collect();

            let ff_pre: Vec<Vec<f64>> = ln2_out
                .iter()
                .map(|row| {
                    let mut u = mat_vec(&block.ff_up, row);
                    add_assign(&mut u, &block.ff_up_bias);
                    u
                })
                .collect();
            let ff_act: Vec<Vec<f64>> = ff_pre
                .iter()
                .map(|u| u.iter().map(|&x| gelu(x)).collect())
                .collect();
            let ff_out: Vec<Vec<f64>> = ff_act
                .iter()
                .map(|a| {
                    let mut o = mat_vec(&block.ff_down, a);
                    add_assign(&mut o, &block.ff_down_bias);
                    o
                })
                .collect();

            x = x_in;
            for t in 0..t_len {
                for i in 0..d {
                    x[t][i] += attn_out[t][i] + ff_out[t][i];
                }
            }

            layers.push(LayerCache {
                ln1_norm,
                ln1_inv,
                ln1_out,
                ln2_norm,
                ln2_inv,
                ln2_out,
                q_rot,
                k_rot,
                v,
                probs,
                ctx,
                ff_pre,
                ff_act,
            });
        }

        let mut final_norm = Vec::with_capacity(t_len);
        let mut final_inv = Vec::with_capacity(t_len);
        let mut final_out = Vec::with_capacity(t_len);
        let mut logits = Matrix::zeros(t_len, self.config.vocab_size);
        for (t, row) in x.iter().enumerate() {
            let (o, n, inv) = layer_norm_cached(row, &self.final_ln);
            for v_idx in 0..self.config.vocab_size {
                logits.row_mut(t)[v_idx] = dot(self.output_proj.row(v_idx), &o);
            }
            final_norm.push(n);
            final_inv.push(inv);
            final_out.push(o);
        }

        Ok(ForwardPass {
            ids: ids.to_vec(),
            layers,
            final_norm,
            final_inv,
            final_out,
            logits,
        })
    }

    /// Logits for every position, `T x vocab`.
    pub fn logits(&self, ids: &[u32]) -> Result<Matrix, ModelError> {
        Ok(self.forward(ids)?.logits)
    }

    /// Log-probabilities of the next token at every position.
    pub fn next_token_logprobs(&self, ids: &[u32]) -> Result<Matrix, ModelError> {
        let logits = self.logits(ids)?;
        let mut out = Matrix::zeros(logits.rows, logits.cols);
        for t in 0..logits.rows {
            let ls = log_softmax(logits.row(t));
            out.row_mut(t).copy_from_slice(&ls);
        }
        Ok(out)
    }

    /// Mean next-token cross-entropy under causal masking, plus logits.
    pub fn forward_loss(&self, ids: &[u32]) -> Result<(f64, Matrix), ModelError> {
        if ids.len() < 2 {
            return Err(ModelError::SequenceTooShort { len: ids.len() });
        }
        let pass = self.forward(ids)?;
        Ok((pass.loss(), pass.logits))
    }
}

/// Caches from one forward evaluation.
pub struct ForwardPass {
    pub(crate) ids: Vec<u32>,
    pub(crate) layers: Vec<LayerCache>,
    pub(crate) final_norm: Vec<Vec<f64>>,
    pub(crate) final_inv: Vec<f64>,
    pub(crate) final_out: Vec<Vec<f64>>,
    pub logits: Matrix,
}

impl ForwardPass {
    /// Mean cross-entropy of predicting `ids[t+1]` from position `t`;
    /// the final position carries no target.
    pub fn loss(&self) -> f64 {
        let shifted: Vec<u32> = self.ids[1..].to_vec();
        self.loss_for(&shifted)
    }

    /// Mean cross-entropy against explicit targets: `targets[t]` is the
    /// token position `t` must predict. Supplying `ids.len()` targets
    /// supervises every position (the training data layout, where the
    /// final target is the token after the window); `ids.len() - 1`
    /// targets leave the last position unsupervised.
    pub fn loss_for(&self, targets: &[u32]) -> f64 {
        assert!(
            !targets.is_empty(),
            "loss needs at least one supervised position"
        );
        assert!(
            targets.len() == self.ids.len() || targets.len() + 1 == self.ids.len(),
            "need one target per supervised position"
        );
        let mut total = 0.0;
        for (t, &target) in targets.iter().enumerate() {
            let ls = log_softmax(self.logits.row(t));
            total -= ls[target as usize];
        }
        total / targets.len() as f64
    }
}

pub(crate) struct LayerCache {
    pub ln1_norm: Vec<Vec<f64>>,
    pub ln1_inv: Vec<f64>,
    pub ln1_out: Vec<Vec<f64>>,
    pub ln2_norm: Vec<Vec<f64>>,
    pub ln2_inv: Vec<f64>,
    pub ln2_out: Vec<Vec<f64>>,
    pub q_rot: Vec<Vec<f64>>,
    pub k_rot: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub probs: Vec<Vec<Vec<f64>>>,
    pub ctx: Vec<Vec<f64>>,
    pub ff_pre: Vec<Vec<f64>>,
    pub ff_act: Vec<Vec<f64>>,
}

/// Draw a fresh model: output layers (attention out, FF down) at
/// `N(0, (2/(L*sqrt(d)))^2)`, all other weight matrices at `N(0, 2/(5d))`,
/// biases zero, layer-norm gains one. Deterministic per seed.
pub fn init_params(config: &ModelConfig) -> Result<LMModel, ModelError> {
    config.validate()?;
    let mut model = LMModel::zeros(config)?;
    let d = config.hidden_size as f64;
    let small_std = (2.0 / (5.0 * d)).sqrt();
    let wang_std = if config.num_layers > 0 {
        2.0 / (config.num_layers as f64 * d.sqrt())
    } else {
        0.0
    };
    let mut sampler = NormalSampler::new(config.seed);
    model.for_each_param_mut(|_, kind, data| match kind {
        ParamKind::WeightSmall => {
            for v in data.iter_mut() {
                *v = sampler.sample() * small_std;
            }
        }
        ParamKind::WeightWang => {
            for v in data.iter_mut() {
                *v = sampler.sample() * wang_std;
            }
        }
        ParamKind::Bias => {}
        ParamKind::Gain => data.fill(1.0),
    });
    Ok(model)
}

/// Closed-form parameter counts for a configuration.
///
/// Per layer: 4 attention matrices and biases, the 8d^2 feed-forward pair
/// with biases, and two layer norms: `12d^2 + 13d`. Non-embedding adds
/// the final layer norm; total adds input embedding and output projection
/// (one `vocab*d` each when untied).
pub fn param_count(config: &ModelConfig) -> ParamCounts {
    let d = config.hidden_size as u64;
    let l = config.num_layers as u64;
    let vocab = config.vocab_size as u64;
    let per_layer = 12 * d * d + 13 * d;
    let non_embedding = l * per_layer + 2 * d;
    let embedding_params = if config.weight_tying {
        vocab * d
    } else {
        2 * vocab * d
    };
    ParamCounts {
        total: non_embedding + embedding_params,
        non_embedding,
    }
}
