//! End-to-end training behavior: loss decreases on a learnable stream,
//! runs are bitwise reproducible, checkpoints land on schedule, and
//! wrapping the corpus introduces nothing beyond the cursor reset.

use neoxkit_model_core::{init_params, load_checkpoint, ModelConfig};
use neoxkit_trainer::{train, TrainConfig, TrainOptions};

/// Token stream with short-range structure a tiny model can learn.
fn synthetic_stream(len: usize, vocab: u32, seed: u64) -> Vec<u32> {
    let mut state = seed | 1;
    let mut out = Vec::with_capacity(len);
    let mut prev = 0u32;
    for i in 0..len {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let r = (state >> 33) as u32;
        // Mostly deterministic successor pattern with occasional jumps.
        let tok = if r.is_multiple_of(8) {
            r % vocab
        } else {
            (prev + 1) % vocab
        };
        out.push(tok);
        prev = tok;
        let _ = i;
    }
    out
}

fn toy_model_config(seed: u64) -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        hidden_size: 64,
        num_heads: 8,
        rotary_pct: 0.25,
        rotary_base: 10_000.0,
        max_positions: 160,
        vocab_size: 64,
        weight_tying: false,
        seed,
    }
}

#[test]
fn short_run_reduces_loss() {
    let mut model = init_params(&toy_model_config(5)).unwrap();
    let corpus = synthetic_stream(20_000, 64, 99);
    let mut cfg = TrainConfig::new(3e-3, 40, 4 * 64, 64);
    cfg.seed = 1;
    cfg.log_interval = 10;
    let out = train(&mut model, &corpus, &cfg, &TrainOptions::default()).unwrap();
    assert!(
        out.final_loss < 0.8 * out.initial_loss,
        "loss {} -> {}",
        out.initial_loss,
        out.final_loss
    );
}

#[test]
fn training_is_bitwise_reproducible() {
    let corpus = synthetic_stream(6_000, 64, 4);
    let cfg = TrainConfig::new(1e-3, 12, 2 * 64, 64);
    let mut a = init_params(&toy_model_config(7)).unwrap();
    let mut b = init_params(&toy_model_config(7)).unwrap();
    let out_a = train(&mut a, &corpus, &cfg, &TrainOptions::default()).unwrap();
    let out_b = train(&mut b, &corpus, &cfg, &TrainOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(out_a.log.entries, out_b.log.entries);
}

#[test]
fn checkpoints_land_on_the_interval_plus_final() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic_stream(4_000, 64, 12);
    let mut cfg = TrainConfig::new(1e-3, 20, 128, 64);
    cfg.checkpoint_interval = 5;
    let mut model = init_params(&toy_model_config(1)).unwrap();
    let opts = TrainOptions {
        checkpoint_dir: Some(dir.path()),
        val_ids: None,
    };
    let out = train(&mut model, &corpus, &cfg, &opts).unwrap();
    let names: Vec<String> = out
        .checkpoints
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        vec![
            "step5.ckpt",
            "step10.ckpt",
            "step15.ckpt",
            "step20.ckpt",
            "final.ckpt"
        ]
    );
    // 20 steps / interval 5: exactly 4 periodic checkpoints plus final.
    assert_eq!(names.len(), 5);
    let reloaded = load_checkpoint(&out.checkpoints[4]).unwrap();
    assert_eq!(reloaded, model);
}

#[test]
fn epoch_wrap_lands_where_the_arithmetic_says_and_stays_deterministic() {
    // The corpus holds exactly 8 windows of 64 tokens plus the overlap
    // token: 2 contexts/step means the 9th window (step 5) wraps. The
    // wrap may touch nothing but the data cursor, so two runs crossing
    // the boundary stay bitwise identical and the optimizer keeps
    // stepping (loss keeps evolving smoothly after the boundary).
    let base = synthetic_stream(64 * 8 + 1, 64, 33);
    let mut cfg = TrainConfig::new(1e-3, 8, 2 * 64, 64);
    cfg.log_interval = 1;
    let mut a = init_params(&toy_model_config(2)).unwrap();
    let mut b = init_params(&toy_model_config(2)).unwrap();
    let out_a = train(&mut a, &base, &cfg, &TrainOptions::default()).unwrap();
    let out_b = train(&mut b, &base, &cfg, &TrainOptions::default()).unwrap();

    assert_eq!(out_a.epoch_boundaries, vec![5]);
    assert_eq!(a, b);
    assert_eq!(out_a.log.entries, out_b.log.entries);
    let epochs: Vec<u64> = out_a.log.entries.iter().map(|e| e.epoch).collect();
    assert_eq!(epochs, vec![0, 0, 0, 0, 1, 1, 1, 1]);
    for e in &out_a.log.entries {
        assert!(e.train_loss.is_finite());
    }
}

#[test]
fn validation_loss_appears_on_eval_interval() {
    let corpus = synthetic_stream(4_000, 64, 8);
    let val = synthetic_stream(1_000, 64, 9);
    let mut cfg = TrainConfig::new(1e-3, 6, 128, 64);
    cfg.eval_interval = 3;
    cfg.log_interval = 1;
    let mut model = init_params(&toy_model_config(3)).unwrap();
    let opts = TrainOptions {
        checkpoint_dir: None,
        val_ids: Some(&val),
    };
    let out = train(&mut model, &corpus, &cfg, &opts).unwrap();
    for e in &out.log.entries {
        if e.step % 3 == 0 {
            assert!(
                e.val_loss.is_some(),
                "step {} should carry val loss",
                e.step
            );
        } else {
            assert!(e.val_loss.is_none());
        }
    }
}

#[test]
fn loss_log_serializes_line_per_entry() {
    let corpus = synthetic_stream(2_000, 64, 8);
    let mut cfg = TrainConfig::new(1e-3, 4, 128, 64);
    cfg.log_interval = 1;
    let mut model = init_params(&toy_model_config(4)).unwrap();
    let out = train(&mut model, &corpus, &cfg, &TrainOptions::default()).unwrap();
    let mut buf = Vec::new();
    out.log.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), out.log.entries.len());
    assert!(text.lines().next().unwrap().starts_with("{\"step\":1,"));
}

#[test]
fn corpus_smaller_than_one_window_errors() {
    let corpus = vec![1u32; 10];
    let cfg = TrainConfig::new(1e-3, 4, 128, 64);
    let mut model = init_params(&toy_model_config(4)).unwrap();
    assert!(train(&mut model, &corpus, &cfg, &TrainOptions::default()).is_err());
}
