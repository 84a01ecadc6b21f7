//! Training recipe: AdamW (betas 0.9/0.95, eps 1e-8, decoupled weight
//! decay 0.01 on matrices only), global-norm gradient clipping at 1.0,
//! linear warmup into a cosine decay that ends at exactly one tenth of
//! the peak learning rate, fixed token-count batches, periodic
//! checkpoints and a line-delimited loss log.

mod adamw;
mod schedule;
mod train_loop;

pub use adamw::{adamw_step, OptState};
pub use schedule::lr_at;
pub use train_loop::{train, LogEntry, LossLog, TrainOptions, TrainOutput};

use std::fmt;

/// Hyperparameters of one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub peak_lr: f64,
    /// Exactly `peak_lr / 10`.
    pub min_lr: f64,
    pub total_steps: u64,
    pub warmup_steps: u64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    /// Tokens consumed per optimizer step; `contexts * seq_len`.
    pub batch_tokens: u64,
    pub seq_len: u64,
    pub checkpoint_interval: u64,
    pub log_interval: u64,
    pub eval_interval: u64,
    pub seed: u64,
}

impl TrainConfig {
    /// Reference defaults with the caller's scale parameters.
    pub fn new(peak_lr: f64, total_steps: u64, batch_tokens: u64, seq_len: u64) -> Self {
        let warmup_frac = 0.01;
        TrainConfig {
            peak_lr,
            min_lr: peak_lr / 10.0,
            total_steps,
            warmup_steps: (warmup_frac * total_steps as f64).round() as u64,
            betas: (0.9, 0.95),
            eps: 1e-8,
            weight_decay: 0.01,
            grad_clip: 1.0,
            batch_tokens,
            seq_len,
            checkpoint_interval: 500,
            log_interval: 2,
            eval_interval: 1000,
            seed: 0,
        }
    }

    pub fn contexts_per_step(&self) -> u64 {
        self.batch_tokens / self.seq_len
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        // NaN-rejecting comparison: NaN fails the `>` and lands here.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.peak_lr > 0.0) {
            return Err(TrainerError::Config("peak_lr must be positive".into()));
        }
        if self.min_lr != self.peak_lr / 10.0 {
            return Err(TrainerError::Config(
                "min_lr must be exactly peak_lr / 10".into(),
            ));
        }
        if self.total_steps == 0 || self.warmup_steps > self.total_steps {
            return Err(TrainerError::Config(
                "need 0 <= warmup_steps <= total_steps and total_steps > 0".into(),
            ));
        }
        if self.seq_len < 2 {
            return Err(TrainerError::Config("seq_len must be at least 2".into()));
        }
        if self.batch_tokens == 0 || !self.batch_tokens.is_multiple_of(self.seq_len) {
            return Err(TrainerError::Config(
                "batch_tokens must be a positive multiple of seq_len".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum TrainerError {
    Config(String),
    /// Non-finite gradient, naming the offending parameter tensor.
    NonFiniteGrad {
        param: String,
    },
    CorpusTooSmall {
        needed: usize,
        got: usize,
    },
    Model(neoxkit_model_core::ModelError),
    Checkpoint(neoxkit_model_core::CheckpointError),
    Io(std::io::Error),
}

impl fmt::Display for TrainerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainerError::Config(msg) => write!(f, "bad training config: {msg}"),
            TrainerError::NonFiniteGrad { param } => {
                write!(f, "non-finite gradient in parameter `{param}`")
            }
            TrainerError::CorpusTooSmall { needed, got } => {
                write!(
                    f,
                    "corpus of {got} tokens cannot fill one context of {needed}"
                )
            }
            TrainerError::Model(e) => write!(f, "{e}"),
            TrainerError::Checkpoint(e) => write!(f, "{e}"),
            TrainerError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for TrainerError {}

impl From<neoxkit_model_core::ModelError> for TrainerError {
    fn from(e: neoxkit_model_core::ModelError) -> Self {
        TrainerError::Model(e)
    }
}

impl From<neoxkit_model_core::CheckpointError> for TrainerError {
    fn from(e: neoxkit_model_core::CheckpointError) -> Self {
        TrainerError::Checkpoint(e)
    }
}

impl From<std::io::Error> for TrainerError {
    fn from(e: std::io::Error) -> Self {
        TrainerError::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_lr_is_exactly_a_tenth() {
        let cfg = TrainConfig::new(9.7e-5, 150_000, 1538 * 2048, 2048);
        assert_eq!(cfg.min_lr, 9.7e-6);
        assert_eq!(cfg.warmup_steps, 1500);
        cfg.validate().unwrap();
    }

    #[test]
    fn reference_batch_is_3_15m_tokens() {
        let cfg = TrainConfig::new(9.7e-5, 150_000, 1538 * 2048, 2048);
        assert_eq!(cfg.batch_tokens, 3_149_824);
        assert_eq!(cfg.contexts_per_step(), 1538);
        assert!((cfg.batch_tokens as f64 - 3.15e6).abs() / 3.15e6 < 0.001);
    }

    #[test]
    fn indivisible_batch_is_rejected() {
        let mut cfg = TrainConfig::new(1e-3, 100, 1000, 128);
        assert!(cfg.validate().is_err());
        cfg.batch_tokens = 1024;
        cfg.validate().unwrap();
    }
}
