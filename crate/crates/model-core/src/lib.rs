//! Decoder-only transformer at desk scale, double precision throughout.
//!
//! Architecture notes relative to a plain GPT-2/GPT-3 stack:
//!
//! - rotary position embeddings on the first `rotary_pct` of each head's
//!   dimensions (the rest stay position-free);
//! - attention and feed-forward computed in parallel from the same block
//!   input, each behind its own layer norm, summed into the residual;
//! - dense layers only;
//! - output projections (attention output and FF down-projection) are
//!   initialized at std `2/(L*sqrt(d))`, everything else at
//!   `sqrt(2/(5d))`;
//! - no weight tying: the output projection is a tensor of its own.

#![allow(clippy::needless_range_loop)]

mod backward;
mod block;
mod checkpoint;
mod config;
mod error;
pub mod math;
mod model;
mod rotary;

pub use block::{
    attention_branch, feedforward_branch, gelu, layer_norm, parallel_block_forward, Block,
    LayerNorm, LN_EPS,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use config::{ModelConfig, ParamCounts};
pub use error::ModelError;
pub use math::Matrix;
pub use model::{init_params, param_count, ForwardPass, LMModel, ParamKind};
pub use rotary::{apply_rotary, attention_scores, rotary_thetas, RotaryCache};
