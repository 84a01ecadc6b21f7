//! One transformer block: attention and feed-forward evaluated in
//! parallel from the same input, each behind its own layer norm, both
//! summed into the residual stream.

use crate::error::ModelError;
use crate::math::{add_assign, dot, mat_vec, softmax, Matrix};
use crate::rotary::{rotate_in_place, RotaryCache};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerNorm {
    pub fn identity(dim: usize) -> Self {
        LayerNorm {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
        }
    }
}

/// Block parameters. The two layer norms are independent tensors: the
/// attention branch reads `ln1(x)`, the feed-forward branch `ln2(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub num_heads: usize,
    pub ln1: LayerNorm,
    pub ln2: LayerNorm,
    pub w_q: Matrix,
    pub b_q: Vec<f64>,
    pub w_k: Matrix,
    pub b_k: Vec<f64>,
    pub w_v: Matrix,
    pub b_v: Vec<f64>,
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
    pub ff_up: Matrix,
    pub ff_up_bias: Vec<f64>,
    pub ff_down: Matrix,
    pub ff_down_bias: Vec<f64>,
}

impl Block {
    pub fn zeros(hidden: usize, num_heads: usize) -> Self {
        Block {
            num_heads,
            ln1: LayerNorm {
                gain: vec![0.0; hidden],
                bias: vec![0.0; hidden],
            },
            ln2: LayerNorm {
                gain: vec![0.0; hidden],
                bias: vec![0.0; hidden],
            },
            w_q: Matrix::zeros(hidden, hidden),
            b_q: vec![0.0; hidden],
            w_k: Matrix::zeros(hidden, hidden),
            b_k: vec![0.0; hidden],
            w_v: Matrix::zeros(hidden, hidden),
            b_v: vec![0.0; hidden],
            w_o: Matrix::zeros(hidden, hidden),
            b_o: vec![0.0; hidden],
            ff_up: Matrix::zeros(4 * hidden, hidden),
            ff_up_bias: vec![0.0; 4 * hidden],
            ff_down: Matrix::zeros(hidden, 4 * hidden),
            ff_down_bias: vec![0.0; hidden],
        }
    }
}

/// Normalize one vector: `gain * (x - mean) / sqrt(var + eps) + bias`.
pub fn layer_norm(x: &[f64], ln: &LayerNorm) -> Vec<f64> {
    let (out, _, _) = layer_norm_cached(x, ln);
    out
}

/// Returns `(out, normalized, inv_std)`; the latter two feed backprop.
pub(crate) fn layer_norm_cached(x: &[f64], ln: &LayerNorm) -> (Vec<f64>, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LN_EPS).sqrt();
    let normalized: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let out = normalized
        .iter()
        .zip(ln.gain.iter().zip(&ln.bias))
        .map(|(&y, (&g, &b))| g * y + b)
        .collect();
    (out, normalized, inv_std)
}

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.7978845608028654;
    const C: f64 = 0.044715;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + C * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.7978845608028654;
    const C: f64 = 0.044715;
    let u = SQRT_2_OVER_PI * (x + C * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * C * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Multi-head causal self-attention over `ln1(x)`: the attention branch
/// of the parallel block.
pub fn attention_branch(
    x: &[Vec<f64>],
    block: &Block,
    cache: &RotaryCache,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let normed: Vec<Vec<f64>> = x.iter().map(|row| layer_norm(row, &block.ln1)).collect();
    attention_over(&normed, block, cache)
}

/// Attention over already-normalized inputs.
pub(crate) fn attention_over(
    normed: &[Vec<f64>],
    block: &Block,
    cache: &RotaryCache,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let t_len = normed.len();
    let hidden = block.w_q.cols;
    let num_heads = block.num_heads;
    let head_dim = hidden / num_heads;
    if t_len > cache.max_positions() {
        return Err(ModelError::PositionOutOfRange {
            position: t_len - 1,
            max_positions: cache.max_positions(),
        });
    }

    let project = |w: &Matrix, b: &[f64]| -> Vec<Vec<f64>> {
        normed
            .iter()
            .map(|row| {
                let mut v = mat_vec(w, row);
                add_assign(&mut v, b);
                v
            })
            .collect()
    };
    let mut q = project(&block.w_q, &block.b_q);
    let mut k = project(&block.w_k, &block.b_k);
    let v = project(&block.w_v, &block.b_v);

    for t in 0..t_len {
        for h in 0..num_heads {
            let lo = h * head_dim;
            rotate_in_place(&mut q[t][lo..lo + head_dim], t, cache, false);
            rotate_in_place(&mut k[t][lo..lo + head_dim], t, cache, false);
        }
    }

    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut ctx = vec![vec![0.0; hidden]; t_len];
    for h in 0..num_heads {
        let lo = h * head_dim;
        let hi = lo + head_dim;
        for t in 0..t_len {
            let mut scores = vec![f64::NEG_INFINITY; t + 1];
            for (u, s) in scores.iter_mut().enumerate() {
                *s = dot(&q[t][lo..hi], &k[u][lo..hi]) * scale;
            }
            let probs = softmax(&scores);
            for (u, &p) in probs.iter().enumerate() {
                for i in lo..hi {
                    ctx[t][i] += p * v[u][i];
                }
            }
        }
    }

    Ok(ctx
        .iter()
        .map(|c| {
            let mut out = mat_vec(&block.w_o, c);
            add_assign(&mut out, &block.b_o);
            out
        })
        .collect())
}

/// Feed-forward branch `ff(ln2(x))` with GELU.
pub fn feedforward_branch(x: &[Vec<f64>], block: &Block) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            let normed = layer_norm(row, &block.ln2);
            let mut up = mat_vec(&block.ff_up, &normed);
            add_assign(&mut up, &block.ff_up_bias);
            let act: Vec<f64> = up.iter().map(|&u| gelu(u)).collect();
            let mut down = mat_vec(&block.ff_down, &act);
            add_assign(&mut down, &block.ff_down_bias);
            down
        })
        .collect()
}

/// `x + attention(ln1(x)) + ff(ln2(x))`; both branches read the same
/// input, there is no serial dependence between them.
pub fn parallel_block_forward(
    x: &[Vec<f64>],
    block: &Block,
    cache: &RotaryCache,
) -> Result<Vec<Vec<f64>>, ModelError> {
    for (t, row) in x.iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteInput(format!(
                "block input at position {t}"
            )));
        }
    }
    let attn = attention_branch(x, block, cache)?;
    let ff = feedforward_branch(x, block);
    Ok(x.iter()
        .zip(attn.iter().zip(&ff))
        .map(|(xi, (ai, fi))| {
            xi.iter()
                .zip(ai.iter().zip(fi))
                .map(|(&xv, (&av, &fv))| xv + av + fv)
                .collect()
        })
        .collect())
}
