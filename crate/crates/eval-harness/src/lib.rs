//! Few-shot evaluation harness for autoregressive models.
//!
//! Multiple-choice items score each choice by summed next-token
//! log-likelihood (optionally length-normalized) and predict the argmax,
//! ties to the lowest index; exact-match items decode greedily to a stop
//! sequence. Accuracy reports carry `sqrt(acc*(1-acc)/n)` standard
//! errors, and intervals print as `acc ± 2*stderr`.

mod harness;
mod task;

pub use harness::{
    build_prompt, evaluate, evaluate_with, fewshot_delta, generate_greedy, generate_greedy_ids,
    score_choice, score_ids, stderr_of, ChoiceScoring, DeltaReport, EvalResult, PromptTemplate,
    Scorer,
};
pub use task::{load_task, save_task, EvalItem, EvalTask, TaskKind};

use std::fmt;

/// Anything that yields next-token log-probabilities for a token
/// sequence: row `t` is the log-distribution of the token following
/// `ids[..=t]`.
pub trait ScoringModel {
    fn vocab_size(&self) -> usize;
    fn next_token_logprobs(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>, EvalError>;
}

impl ScoringModel for neoxkit_model_core::LMModel {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn next_token_logprobs(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>, EvalError> {
        let m = neoxkit_model_core::LMModel::next_token_logprobs(self, ids)
            .map_err(|e| EvalError::Model(e.to_string()))?;
        Ok((0..m.rows).map(|t| m.row(t).to_vec()).collect())
    }
}

#[derive(Debug)]
pub enum EvalError {
    EmptyContinuation,
    EmptyPrompt,
    ShotsExceedPool { k: usize, pool: usize },
    TaskMismatch { detail: String },
    EmptyTask,
    BadTaskFile { line: usize, reason: String },
    Model(String),
    Io(std::io::Error),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyContinuation => write!(f, "continuation tokenizes to nothing"),
            EvalError::EmptyPrompt => write!(f, "prompt tokenizes to nothing"),
            EvalError::ShotsExceedPool { k, pool } => {
                write!(f, "requested {k} shots but the exemplar pool holds {pool}")
            }
            EvalError::TaskMismatch { detail } => write!(f, "task lists differ: {detail}"),
            EvalError::EmptyTask => write!(f, "task has no items"),
            EvalError::BadTaskFile { line, reason } => {
                write!(f, "bad task file at line {line}: {reason}")
            }
            EvalError::Model(msg) => write!(f, "model error: {msg}"),
            EvalError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e)
    }
}
