//! Gradient correctness against central finite differences, plus the
//! structural gradient properties (blocked branches, sparsity, causality).

use neoxkit_model_core::{init_params, LMModel, ModelConfig};

fn flat_grads(grads: &LMModel) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    grads.for_each_param(|name, _, data| out.push((name.to_string(), data.to_vec())));
    out
}

fn perturb(model: &mut LMModel, target: &str, idx: usize, delta: f64) {
    model.for_each_param_mut(|name, _, data| {
        if name == target {
            data[idx] += delta;
        }
    });
}

/// Central-difference gradient check over every parameter.
fn check_all_gradients(cfg: &ModelConfig, ids: &[u32], step: f64, tol: f64) -> (f64, String) {
    let model = init_params(cfg).unwrap();
    let (_, grads) = model.backward(ids).unwrap();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for (name, grad) in flat_grads(&grads) {
        for (idx, &analytic) in grad.iter().enumerate() {
            let mut m = model.clone();
            perturb(&mut m, &name, idx, step);
            let (up, _) = m.forward_loss(ids).unwrap();
            perturb(&mut m, &name, idx, -2.0 * step);
            let (down, _) = m.forward_loss(ids).unwrap();
            let numeric = (up - down) / (2.0 * step);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
            if rel > worst {
                worst = rel;
                worst_at = format!("{name}[{idx}]");
            }
        }
    }
    assert!(worst < tol, "worst relative error {worst} at {worst_at}");
    (worst, worst_at)
}

#[test]
fn every_gradient_matches_finite_differences() {
    let cfg = ModelConfig {
        num_layers: 1,
        hidden_size: 16,
        num_heads: 2,
        rotary_pct: 0.25,
        rotary_base: 10_000.0,
        max_positions: 8,
        vocab_size: 24,
        weight_tying: false,
        seed: 3,
    };
    let ids = [5u32, 11, 3, 19, 7];
    let (worst, at) = check_all_gradients(&cfg, &ids, 1e-5, 1e-4);
    println!("worst relative error {worst:.3e} at {at}");
}

#[test]
fn zero_gain_layer_norms_block_branch_gradients() {
    // With both LN gains zeroed the branches emit constants, so branch
    // weights upstream of the gains get no gradient and the residual
    // carries the loss gradient straight to the embedding.
    let cfg = ModelConfig {
        num_layers: 1,
        ..ModelConfig::toy()
    };
    let mut model = init_params(&cfg).unwrap();
    for b in &mut model.blocks {
        b.ln1.gain.fill(0.0);
        b.ln2.gain.fill(0.0);
    }
    let ids = [1u32, 2, 3, 4];
    let (_, grads) = model.backward(&ids).unwrap();
    let b = &grads.blocks[0];
    for (name, g) in [
        ("w_q", &b.w_q.data),
        ("w_k", &b.w_k.data),
        ("w_v", &b.w_v.data),
        ("ff_up", &b.ff_up.data),
    ] {
        assert!(
            g.iter().all(|&v| v == 0.0),
            "{name} should have zero gradient behind a zero-gain layer norm"
        );
    }
    // The gains themselves still learn.
    assert!(b.ln1.gain.iter().any(|&v| v != 0.0) || b.ln2.gain.iter().any(|&v| v != 0.0));
}

#[test]
fn unused_embedding_rows_get_zero_gradient() {
    let cfg = ModelConfig::toy();
    let model = init_params(&cfg).unwrap();
    let ids = [1u32, 2, 3, 2, 1];
    let (_, grads) = model.backward(&ids).unwrap();
    for row in 0..cfg.vocab_size {
        let grad_row = grads.embedding.row(row);
        let used = ids.contains(&(row as u32));
        if used {
            assert!(grad_row.iter().any(|&v| v != 0.0), "row {row} should train");
        } else {
            assert!(grad_row.iter().all(|&v| v == 0.0), "row {row} is unused");
        }
    }
}

#[test]
fn output_projection_rows_are_dense_through_softmax() {
    // Softmax cross-entropy feeds probability mass to every vocab row,
    // so even unused tokens' output rows receive (small) gradient.
    let cfg = ModelConfig::toy();
    let model = init_params(&cfg).unwrap();
    let ids = [1u32, 2, 3];
    let (_, grads) = model.backward(&ids).unwrap();
    let unused_row = grads.output_proj.row(40);
    assert!(unused_row.iter().any(|&v| v != 0.0));
}

#[test]
fn logits_are_causal() {
    let cfg = ModelConfig::toy();
    let model = init_params(&cfg).unwrap();
    let base = [4u32, 9, 14, 19, 24, 29];
    let logits = model.logits(&base).unwrap();
    for t in 0..base.len() - 1 {
        let mut changed = base;
        changed[t + 1] = 63;
        let other = model.logits(&changed).unwrap();
        for u in 0..=t {
            assert_eq!(
                logits.row(u),
                other.row(u),
                "position {u} saw a change at future position {}",
                t + 1
            );
        }
    }
}
