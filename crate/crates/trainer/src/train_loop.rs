//! The step loop: fixed token-count batches, gradient accumulation in a
//! fixed order, scheduled AdamW updates, periodic checkpoints and a
//! line-delimited loss log. Single-threaded and bitwise reproducible for
//! a fixed seed.

use std::io::Write;
use std::path::{Path, PathBuf};

use neoxkit_model_core::{save_checkpoint, LMModel};

use crate::adamw::{adamw_step, OptState};
use crate::schedule::lr_at;
use crate::{TrainConfig, TrainerError};

/// One loss-log record.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: u64,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub epoch: u64,
}

#[derive(Debug, Clone, Default)]
pub struct LossLog {
    pub entries: Vec<LogEntry>,
}

impl LossLog {
    /// Line-delimited records: one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for e in &self.entries {
            let val = match e.val_loss {
                Some(v) => format!("{v:?}"),
                None => "null".to_string(),
            };
            writeln!(
                w,
                "{{\"step\":{},\"lr\":{:?},\"train_loss\":{:?},\"val_loss\":{},\"epoch\":{}}}",
                e.step, e.lr, e.train_loss, val, e.epoch
            )?;
        }
        Ok(())
    }
}

/// Where checkpoints and validation data come from; both optional.
#[derive(Default)]
pub struct TrainOptions<'a> {
    pub checkpoint_dir: Option<&'a Path>,
    pub val_ids: Option<&'a [u32]>,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub log: LossLog,
    pub checkpoints: Vec<PathBuf>,
    /// Mean batch loss of the first and last optimizer steps.
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Steps at which the data cursor wrapped to a new epoch.
    pub epoch_boundaries: Vec<u64>,
}

/// Reads windows of `seq_len + 1` tokens advancing by `seq_len`, so
/// consecutive windows overlap by one token and every token after the
/// first is predicted exactly once; wraps when the stream runs out.
struct Cursor<'a> {
    corpus: &'a [u32],
    seq_len: usize,
    pos: usize,
    epoch: u64,
    wrapped_this_step: bool,
}

impl<'a> Cursor<'a> {
    fn next_window(&mut self) -> &'a [u32] {
        if self.pos + self.seq_len + 1 > self.corpus.len() {
            self.pos = 0;
            self.epoch += 1;
            self.wrapped_this_step = true;
        }
        let w = &self.corpus[self.pos..self.pos + self.seq_len + 1];
        self.pos += self.seq_len;
        w
    }
}

/// Run `cfg.total_steps` optimizer steps of `cfg.batch_tokens` each.
pub fn train(
    model: &mut LMModel,
    corpus: &[u32],
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<TrainOutput, TrainerError> {
    cfg.validate()?;
    let window = cfg.seq_len as usize + 1;
    if corpus.len() < window {
        return Err(TrainerError::CorpusTooSmall {
            needed: window,
            got: corpus.len(),
        });
    }
    let contexts = cfg.contexts_per_step().max(1);

    let mut state = OptState::new(model);
    let mut cursor = Cursor {
        corpus,
        seq_len: cfg.seq_len as usize,
        pos: 0,
        epoch: 0,
        wrapped_this_step: false,
    };
    let mut log = LossLog::default();
    let mut checkpoints = Vec::new();
    let mut epoch_boundaries = Vec::new();
    let mut initial_loss = f64::NAN;
    let mut final_loss = f64::NAN;

    for step in 1..=cfg.total_steps {
        cursor.wrapped_this_step = false;
        let mut grads = model.zeros_like();
        let mut batch_loss = 0.0;
        for _ in 0..contexts {
            let window = cursor.next_window();
            let (input, targets) = (&window[..window.len() - 1], &window[1..]);
            let pass = model.forward(input)?;
            batch_loss += pass.loss_for(targets);
            model.accumulate_grads_for(&pass, targets, &mut grads);
        }
        batch_loss /= contexts as f64;
        let scale = 1.0 / contexts as f64;
        grads.for_each_param_mut(|_, _, data| {
            for v in data {
                *v *= scale;
            }
        });

        let lr = lr_at(step, cfg);
        adamw_step(model, &grads, &mut state, lr, cfg)?;

        if step == 1 {
            initial_loss = batch_loss;
        }
        final_loss = batch_loss;
        if cursor.wrapped_this_step {
            epoch_boundaries.push(step);
        }

        if step == 1 || step % cfg.log_interval == 0 || step == cfg.total_steps {
            let val_loss = if step % cfg.eval_interval == 0 {
                opts.val_ids
                    .map(|ids| validation_loss(model, ids, cfg.seq_len as usize))
                    .transpose()?
                    .flatten()
            } else {
                None
            };
            log.entries.push(LogEntry {
                step,
                lr,
                train_loss: batch_loss,
                val_loss,
                epoch: cursor.epoch,
            });
        }

        if let Some(dir) = opts.checkpoint_dir {
            if step % cfg.checkpoint_interval == 0 {
                let path = dir.join(format!("step{step}.ckpt"));
                save_checkpoint(model, &path)?;
                checkpoints.push(path);
            }
        }
    }

    if let Some(dir) = opts.checkpoint_dir {
        let path = dir.join("final.ckpt");
        save_checkpoint(model, &path)?;
        checkpoints.push(path);
    }

    Ok(TrainOutput {
        log,
        checkpoints,
        initial_loss,
        final_loss,
        epoch_boundaries,
    })
}

/// Mean loss over validation windows in the training layout; `None`
/// when the held-out stream is shorter than one window.
fn validation_loss(
    model: &LMModel,
    val_ids: &[u32],
    seq_len: usize,
) -> Result<Option<f64>, TrainerError> {
    let mut total = 0.0;
    let mut n = 0u64;
    let mut pos = 0;
    while pos + seq_len < val_ids.len() {
        let window = &val_ids[pos..pos + seq_len + 1];
        let pass = model.forward(&window[..seq_len])?;
        total += pass.loss_for(&window[1..]);
        n += 1;
        pos += seq_len;
    }
    Ok(if n == 0 { None } else { Some(total / n as f64) })
}
