//! Analytic gradients of the next-token loss for every parameter.
//!
//! Gradients live in an `LMModel`-shaped container (same tensors, same
//! visit order), which keeps the optimizer pairing trivial.

use crate::block::{gelu_grad, Block, LayerNorm};
use crate::error::ModelError;
use crate::math::{accumulate_outer, add_assign, dot, mat_tvec, softmax};
use crate::model::{ForwardPass, LMModel, LayerCache};
use crate::rotary::rotate_in_place;

/// `d(loss)/dx` through one layer norm; accumulates the gain/bias grads.
fn ln_backward(
    d_out: &[f64],
    normalized: &[f64],
    inv_std: f64,
    ln: &LayerNorm,
    g_gain: &mut [f64],
    g_bias: &mut [f64],
) -> Vec<f64> {
    let n = d_out.len();
    let nf = n as f64;
    let mut dy = vec![0.0; n];
    let mut sum_dy = 0.0;
    let mut sum_dy_y = 0.0;
    for i in 0..n {
        g_gain[i] += d_out[i] * normalized[i];
        g_bias[i] += d_out[i];
        dy[i] = d_out[i] * ln.gain[i];
        sum_dy += dy[i];
        sum_dy_y += dy[i] * normalized[i];
    }
    let mean_dy = sum_dy / nf;
    let mean_dy_y = sum_dy_y / nf;
    (0..n)
        .map(|i| inv_std * (dy[i] - mean_dy - normalized[i] * mean_dy_y))
        .collect()
}

impl LMModel {
    /// Forward then backward; returns the loss and a gradient container
    /// shaped like the model.
    pub fn backward(&self, ids: &[u32]) -> Result<(f64, LMModel), ModelError> {
        if ids.len() < 2 {
            return Err(ModelError::SequenceTooShort { len: ids.len() });
        }
        let pass = self.forward(ids)?;
        let loss = pass.loss();
        let mut grads = self.zeros_like();
        self.accumulate_grads(&pass, &mut grads);
        Ok((loss, grads))
    }

    /// Backward from a cached forward pass, adding into `grads`; targets
    /// are the shifted input ids (the last position is unsupervised).
    pub fn accumulate_grads(&self, pass: &ForwardPass, grads: &mut LMModel) {
        let shifted: Vec<u32> = pass.ids[1..].to_vec();
        self.accumulate_grads_for(pass, &shifted, grads);
    }

    /// Backward with explicit per-position targets; see
    /// [`ForwardPass::loss_for`] for the accepted target counts.
    pub fn accumulate_grads_for(&self, pass: &ForwardPass, targets: &[u32], grads: &mut LMModel) {
        let t_len = pass.ids.len();
        assert!(
            targets.len() == t_len || targets.len() + 1 == t_len,
            "need one target per supervised position"
        );
        let d = self.config.hidden_size;
        let vocab = self.config.vocab_size;
        let predictions = targets.len() as f64;

        // Cross-entropy: d logits = (softmax - onehot) / predictions at
        // supervised positions.
        let mut d_final_in = vec![vec![0.0; d]; t_len];
        for (t, &target_id) in targets.iter().enumerate() {
            let p = softmax(pass.logits.row(t));
            let target = target_id as usize;
            let h = &pass.final_out[t];
            let mut d_out = vec![0.0; d];
            for v_idx in 0..vocab {
                let dv = (p[v_idx] - if v_idx == target { 1.0 } else { 0.0 }) / predictions;
                let w_row = self.output_proj.row(v_idx);
                let g_row = grads.output_proj.row_mut(v_idx);
                for i in 0..d {
                    d_out[i] += dv * w_row[i];
                    g_row[i] += dv * h[i];
                }
            }
            let dx = ln_backward(
                &d_out,
                &pass.final_norm[t],
                pass.final_inv[t],
                &self.final_ln,
                &mut grads.final_ln.gain,
                &mut grads.final_ln.bias,
            );
            add_assign(&mut d_final_in[t], &dx);
        }

        // Blocks in reverse.
        let mut dx = d_final_in;
        for layer in (0..self.blocks.len()).rev() {
            dx = block_backward(
                &self.blocks[layer],
                &pass.layers[layer],
                &dx,
                &mut grads.blocks[layer],
                self,
            );
        }

        for (t, &id) in pass.ids.iter().enumerate() {
            add_assign(grads.embedding.row_mut(id as usize), &dx[t]);
        }
    }
}

/// Gradient through one parallel block: takes `d(out)`, returns `d(in)`.
fn block_backward(
    block: &Block,
    cache: &LayerCache,
    d_out: &[Vec<f64>],
    g: &mut Block,
    model: &LMModel,
) -> Vec<Vec<f64>> {
    let t_len = d_out.len();
    let d = model.config.hidden_size;
    let num_heads = model.config.num_heads;
    let head_dim = d / num_heads;
    let scale = 1.0 / (head_dim as f64).sqrt();

    // Residual: out = x + attn + ff, all three see d_out directly.
    let mut dx_in: Vec<Vec<f64>> = d_out.to_vec();

    // Feed-forward branch.
    for t in 0..t_len {
        add_assign(&mut g.ff_down_bias, &d_out[t]);
        accumulate_outer(&mut g.ff_down, &d_out[t], &cache.ff_act[t]);
        let da = mat_tvec(&block.ff_down, &d_out[t]);
        let du: Vec<f64> = da
            .iter()
            .zip(&cache.ff_pre[t])
            .map(|(&a, &u)| a * gelu_grad(u))
            .collect();
        add_assign(&mut g.ff_up_bias, &du);
        accumulate_outer(&mut g.ff_up, &du, &cache.ln2_out[t]);
        let dn2 = mat_tvec(&block.ff_up, &du);
        let dx = ln_backward(
            &dn2,
            &cache.ln2_norm[t],
            cache.ln2_inv[t],
            &block.ln2,
            &mut g.ln2.gain,
            &mut g.ln2.bias,
        );
        add_assign(&mut dx_in[t], &dx);
    }

    // Attention branch: output projection first.
    let mut d_ctx = vec![vec![0.0; d]; t_len];
    for t in 0..t_len {
        add_assign(&mut g.b_o, &d_out[t]);
        accumulate_outer(&mut g.w_o, &d_out[t], &cache.ctx[t]);
        let dc = mat_tvec(&block.w_o, &d_out[t]);
        add_assign(&mut d_ctx[t], &dc);
    }

    // Scores, softmax and values per head.
    let mut dq_rot = vec![vec![0.0; d]; t_len];
    let mut dk_rot = vec![vec![0.0; d]; t_len];
    let mut dv = vec![vec![0.0; d]; t_len];
    for h in 0..num_heads {
        let lo = h * head_dim;
        let hi = lo + head_dim;
        for t in 0..t_len {
            let p = &cache.probs[h][t];
            let mut dp = vec![0.0; t + 1];
            for u in 0..=t {
                dp[u] = dot(&d_ctx[t][lo..hi], &cache.v[u][lo..hi]);
                for i in lo..hi {
                    dv[u][i] += p[u] * d_ctx[t][i];
                }
            }
            let sum_pd: f64 = (0..=t).map(|u| p[u] * dp[u]).sum();
            for u in 0..=t {
                let ds = p[u] * (dp[u] - sum_pd);
                for i in lo..hi {
                    dq_rot[t][i] += ds * cache.k_rot[u][i] * scale;
                    dk_rot[u][i] += ds * cache.q_rot[t][i] * scale;
                }
            }
        }
    }

    // Rotation is orthogonal: its backward is the inverse rotation.
    for t in 0..t_len {
        for h in 0..num_heads {
            let lo = h * head_dim;
            rotate_in_place(&mut dq_rot[t][lo..lo + head_dim], t, &model.rotary, true);
            rotate_in_place(&mut dk_rot[t][lo..lo + head_dim], t, &model.rotary, true);
        }
    }

    // Q/K/V projections, then LN1.
    for t in 0..t_len {
        let mut dn1 = vec![0.0; d];
        add_assign(&mut g.b_q, &dq_rot[t]);
        accumulate_outer(&mut g.w_q, &dq_rot[t], &cache.ln1_out[t]);
        add_assign(&mut dn1, &mat_tvec(&block.w_q, &dq_rot[t]));

        add_assign(&mut g.b_k, &dk_rot[t]);
        accumulate_outer(&mut g.w_k, &dk_rot[t], &cache.ln1_out[t]);
        add_assign(&mut dn1, &mat_tvec(&block.w_k, &dk_rot[t]));

        add_assign(&mut g.b_v, &dv[t]);
        accumulate_outer(&mut g.w_v, &dv[t], &cache.ln1_out[t]);
        add_assign(&mut dn1, &mat_tvec(&block.w_v, &dv[t]));

        let dx = ln_backward(
            &dn1,
            &cache.ln1_norm[t],
            cache.ln1_inv[t],
            &block.ln1,
            &mut g.ln1.gain,
            &mut g.ln1.bias,
        );
        add_assign(&mut dx_in[t], &dx);
    }

    dx_in
}
