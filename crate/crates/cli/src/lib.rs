//! Library side of the `neoxkit` binary: run-config assembly, corpus
//! loading and the subcommand implementations. Machine-readable results
//! go to stdout; human diagnostics go to stderr.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::Path;

pub use config::{ConfigError, Provenance, RunConfig, KNOWN_KEYS};

/// Exit-code contract: 0 success, 1 usage, 2 validation, 3 runtime.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn validation(e: impl fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(io) => CliError::Runtime(io.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Load documents from a file or directory. `.jsonl` files contribute
/// one document per line (the `text` field); other files are one
/// document each. Directories are walked in sorted order.
pub fn load_documents(path: &Path) -> Result<Vec<Vec<u8>>, CliError> {
    let mut docs = Vec::new();
    collect_documents(path, &mut docs)?;
    Ok(docs)
}

fn collect_documents(path: &Path, docs: &mut Vec<Vec<u8>>) -> Result<(), CliError> {
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)
            .map_err(CliError::runtime)?
            .collect::<Result<_, _>>()
            .map_err(CliError::runtime)?;
        entries.sort_by_key(|e| e.path());
        for entry in entries {
            collect_documents(&entry.path(), docs)?;
        }
        return Ok(());
    }
    if path.extension().is_some_and(|e| e == "jsonl") {
        let text = std::fs::read_to_string(path).map_err(CliError::runtime)?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| CliError::Validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
            let Some(text) = value.get("text").and_then(|t| t.as_str()) else {
                return Err(CliError::Validation(format!(
                    "{}:{}: record has no `text` field",
                    path.display(),
                    i + 1
                )));
            };
            docs.push(text.as_bytes().to_vec());
        }
    } else {
        docs.push(std::fs::read(path).map_err(CliError::runtime)?);
    }
    Ok(())
}

/// Components of a tokscope corpus: one subdirectory per component.
pub fn load_components(dir: &Path) -> Result<Vec<neoxkit_tokscope::CorpusComponent>, CliError> {
    let mut components = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(CliError::runtime)?
        .collect::<Result<_, _>>()
        .map_err(CliError::runtime)?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            components.push(neoxkit_tokscope::CorpusComponent::new(
                name,
                load_documents(&path)?,
            ));
        }
    }
    if components.is_empty() {
        // A flat directory of files is one unnamed component.
        let docs = load_documents(dir)?;
        if docs.is_empty() {
            return Err(CliError::Validation(format!(
                "corpus directory {} holds no components or documents",
                dir.display()
            )));
        }
        components.push(neoxkit_tokscope::CorpusComponent::new("corpus", docs));
    }
    Ok(components)
}

/// Build the model shape from a run config, filling reference defaults.
pub fn model_config_from(cfg: &mut RunConfig) -> Result<neoxkit_model_core::ModelConfig, CliError> {
    cfg.set_default("rotary-pct", 0.25);
    cfg.set_default("rotary-base", 10000);
    cfg.set_default("no-weight-tying", "True");
    cfg.set_default("seed", 0);
    if cfg.get_raw("max-position-embeddings").is_none() {
        if let Some(seq) = cfg.get_raw("seq-length") {
            let seq = seq.to_string();
            cfg.set_default("max-position-embeddings", seq);
        } else {
            cfg.set_default("max-position-embeddings", 2048);
        }
    }
    let model_cfg = neoxkit_model_core::ModelConfig {
        num_layers: cfg.get_count("num-layers")? as usize,
        hidden_size: cfg.get_count("hidden-size")? as usize,
        num_heads: cfg.get_count("num-attention-heads")? as usize,
        rotary_pct: cfg.get_fraction("rotary-pct")?,
        rotary_base: cfg.get_scalar("rotary-base")?,
        max_positions: cfg.get_count("max-position-embeddings")? as usize,
        vocab_size: cfg.get_count("vocab-size")? as usize,
        weight_tying: !cfg.get_flag("no-weight-tying")?,
        seed: cfg.get_count("seed")?,
    };
    model_cfg.validate().map_err(CliError::validation)?;
    Ok(model_cfg)
}

/// Build the training recipe from a run config.
pub fn train_config_from(cfg: &mut RunConfig) -> Result<neoxkit_trainer::TrainConfig, CliError> {
    cfg.set_default("optimizer.params.lr", "9.7e-05");
    cfg.set_default("optimizer.params.betas", "[0.9, 0.95]");
    cfg.set_default("optimizer.params.eps", "1e-08");
    cfg.set_default("warmup", 0.01);
    cfg.set_default("weight-decay", 0.01);
    cfg.set_default("gradient-clipping", 1.0);
    cfg.set_default("lr-decay-style", "cosine");
    cfg.set_default("save-interval", 500);
    cfg.set_default("eval-interval", 1000);
    cfg.set_default("log-interval", 2);
    cfg.set_default("seed", 0);
    cfg.set_default("train-micro-batch-size-per-gpu", 1);
    cfg.set_default("gradient-accumulation-steps", 1);

    let style = cfg.get_raw("lr-decay-style").unwrap_or("cosine");
    if style != "cosine" {
        return Err(CliError::Validation(format!(
            "lr-decay-style `{style}` unsupported; only `cosine` is implemented"
        )));
    }
    let peak_lr = cfg.get_scalar("optimizer.params.lr")?;
    let total_steps = cfg.get_count("train-iters")?;
    let seq_len = cfg.get_count("seq-length")?;
    let contexts = match cfg.get_raw("train-batch-contexts") {
        Some(_) => cfg.get_count("train-batch-contexts")?,
        None => {
            cfg.get_count("train-micro-batch-size-per-gpu")?
                * cfg.get_count("gradient-accumulation-steps")?
        }
    };

    let mut train_cfg =
        neoxkit_trainer::TrainConfig::new(peak_lr, total_steps, contexts * seq_len, seq_len);
    let betas = cfg.get_scalar_list("optimizer.params.betas")?;
    if betas.len() != 2 {
        return Err(CliError::Validation(
            "optimizer.params.betas needs exactly two values".into(),
        ));
    }
    train_cfg.betas = (betas[0], betas[1]);
    train_cfg.eps = cfg.get_scalar("optimizer.params.eps")?;
    train_cfg.weight_decay = cfg.get_scalar("weight-decay")?;
    train_cfg.grad_clip = cfg.get_scalar("gradient-clipping")?;
    train_cfg.warmup_steps = (cfg.get_fraction("warmup")? * total_steps as f64).round() as u64;
    train_cfg.checkpoint_interval = cfg.get_count("save-interval")?;
    train_cfg.eval_interval = cfg.get_count("eval-interval")?;
    train_cfg.log_interval = cfg.get_count("log-interval")?;
    train_cfg.seed = cfg.get_count("seed")?;
    if let Some(min_lr_raw) = cfg.get_raw("min-lr") {
        let min_lr: f64 = min_lr_raw.parse().map_err(|_| {
            CliError::Validation(format!(
                "config key `min-lr`: expected number, got `{min_lr_raw}`"
            ))
        })?;
        if min_lr != train_cfg.min_lr {
            return Err(CliError::Validation(format!(
                "min-lr {min_lr:e} must be exactly one tenth of optimizer.params.lr {peak_lr:e}"
            )));
        }
    }
    train_cfg.validate().map_err(CliError::validation)?;
    Ok(train_cfg)
}

/// Warn about config keys nothing consumes, per the warn-never-fail rule.
pub fn warn_unknown_keys(cfg: &RunConfig) {
    let unknown = cfg.unknown_keys(KNOWN_KEYS);
    if !unknown.is_empty() {
        eprintln!(
            "neoxkit: warning: ignoring unknown config keys: {}",
            unknown.join(", ")
        );
    }
}

/// `NEOXKIT_SEED` overrides any configured seed, for CI determinism.
pub fn apply_env_seed(cfg: &mut RunConfig) -> Result<(), CliError> {
    if let Ok(seed) = std::env::var("NEOXKIT_SEED") {
        seed.parse::<u64>().map_err(|_| {
            CliError::Validation(format!("NEOXKIT_SEED must be an integer, got `{seed}`"))
        })?;
        cfg.apply_flag("seed", seed);
    }
    Ok(())
}
