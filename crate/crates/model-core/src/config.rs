use crate::error::ModelError;

/// Model shape and initialization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub num_heads: usize,
    /// Fraction of each head's dimensions that get rotary treatment,
    /// in (0, 1].
    pub rotary_pct: f64,
    pub rotary_base: f64,
    pub max_positions: usize,
    pub vocab_size: usize,
    /// Kept for config-file compatibility; the model itself always keeps
    /// input embedding and output projection untied.
    pub weight_tying: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// A small configuration useful for tests; callers override fields.
    pub fn toy() -> Self {
        ModelConfig {
            num_layers: 2,
            hidden_size: 32,
            num_heads: 4,
            rotary_pct: 0.25,
            rotary_base: 10_000.0,
            max_positions: 64,
            vocab_size: 64,
            weight_tying: false,
            seed: 0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    /// Rotary dimensions per head: `floor(rotary_pct * head_dim)` rounded
    /// down to even.
    pub fn rotary_dims(&self) -> usize {
        let d = (self.rotary_pct * self.head_dim() as f64).floor() as usize;
        d & !1
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_heads == 0 || self.hidden_size == 0 || self.vocab_size == 0 {
            return Err(ModelError::InvalidConfig(
                "hidden_size, num_heads and vocab_size must be positive".into(),
            ));
        }
        if !self.hidden_size.is_multiple_of(self.num_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "hidden_size {} not divisible by num_heads {}",
                self.hidden_size, self.num_heads
            )));
        }
        if !(self.rotary_pct > 0.0 && self.rotary_pct <= 1.0) {
            return Err(ModelError::InvalidConfig(format!(
                "rotary_pct {} outside (0, 1]",
                self.rotary_pct
            )));
        }
        if self.rotary_dims() < 2 {
            return Err(ModelError::InvalidConfig(format!(
                "rotary_pct {} of head_dim {} leaves fewer than 2 rotary dims",
                self.rotary_pct,
                self.head_dim()
            )));
        }
        if self.max_positions == 0 {
            return Err(ModelError::InvalidConfig(
                "max_positions must be >= 1".into(),
            ));
        }
        // NaN-rejecting comparison: NaN fails the `>` and lands here.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.rotary_base > 0.0) {
            return Err(ModelError::InvalidConfig(
                "rotary_base must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Closed-form parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCounts {
    pub total: u64,
    /// Everything except input embedding and output projection.
    pub non_embedding: u64,
}
