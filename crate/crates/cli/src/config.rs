//! Flat `key value` run configuration with provenance tracking.
//!
//! Lines hold one key and one value separated by whitespace; `#` starts
//! a comment. Dotted keys such as `optimizer.params.lr` are accepted and
//! kept as flat names. Flags override file values, file values override
//! defaults; unknown keys warn but never fail.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Default,
    File,
    Flag,
}

#[derive(Debug, Clone)]
pub struct ConfigValue {
    pub raw: String,
    pub provenance: Provenance,
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    MalformedLine {
        line: usize,
        text: String,
    },
    TypeMismatch {
        key: String,
        expected: &'static str,
        got: String,
    },
    MissingKey {
        key: String,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "io error: {e}"),
            ConfigError::MalformedLine { line, text } => {
                write!(
                    f,
                    "malformed config line {line}: `{text}` (want `key value`)"
                )
            }
            ConfigError::TypeMismatch { key, expected, got } => {
                write!(f, "config key `{key}`: expected {expected}, got `{got}`")
            }
            ConfigError::MissingKey { key } => write!(f, "missing config key `{key}`"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, ConfigValue>,
}

impl RunConfig {
    pub fn parse_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once(char::is_whitespace) else {
                return Err(ConfigError::MalformedLine {
                    line: i + 1,
                    text: raw.trim().to_string(),
                });
            };
            cfg.values.insert(
                key.trim().to_string(),
                ConfigValue {
                    raw: value.trim().to_string(),
                    provenance: Provenance::File,
                },
            );
        }
        Ok(cfg)
    }

    /// Strongest override; used for command-line flags and environment
    /// overrides.
    pub fn apply_flag(&mut self, key: &str, value: impl fmt::Display) {
        self.values.insert(
            key.to_string(),
            ConfigValue {
                raw: value.to_string(),
                provenance: Provenance::Flag,
            },
        );
    }

    /// Fill a key only when nothing set it yet.
    pub fn set_default(&mut self, key: &str, value: impl fmt::Display) {
        self.values.entry(key.to_string()).or_insert(ConfigValue {
            raw: value.to_string(),
            provenance: Provenance::Default,
        });
    }

    pub fn provenance(&self, key: &str) -> Option<Provenance> {
        self.values.get(key).map(|v| v.provenance)
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|v| v.raw.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get_raw(key)
            .ok_or(ConfigError::MissingKey { key: key.into() })
    }

    pub fn get_count(&self, key: &str) -> Result<u64, ConfigError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| ConfigError::TypeMismatch {
            key: key.into(),
            expected: "count",
            got: raw.into(),
        })
    }

    pub fn get_scalar(&self, key: &str) -> Result<f64, ConfigError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| ConfigError::TypeMismatch {
            key: key.into(),
            expected: "number",
            got: raw.into(),
        })
    }

    /// A number in [0, 1].
    pub fn get_fraction(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.get_scalar(key)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(ConfigError::TypeMismatch {
                key: key.into(),
                expected: "fraction in [0, 1]",
                got: self.require(key)?.into(),
            });
        }
        Ok(v)
    }

    /// `True`/`False` in any case.
    pub fn get_flag(&self, key: &str) -> Result<bool, ConfigError> {
        let raw = self.require(key)?;
        match raw.to_ascii_lowercase().as_str() {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            _ => Err(ConfigError::TypeMismatch {
                key: key.into(),
                expected: "flag (True/False)",
                got: raw.into(),
            }),
        }
    }

    /// `[0.9, 0.95]`-style list of numbers.
    pub fn get_scalar_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.require(key)?;
        let inner = raw.trim().trim_start_matches('[').trim_end_matches(']');
        inner
            .split(',')
            .map(|p| {
                p.trim().parse().map_err(|_| ConfigError::TypeMismatch {
                    key: key.into(),
                    expected: "list of numbers",
                    got: raw.into(),
                })
            })
            .collect()
    }

    /// Keys that none of the consumers recognize.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        self.values
            .keys()
            .filter(|k| !known.contains(&k.as_str()))
            .cloned()
            .collect()
    }

    /// Render back to the file syntax; `parse(emit(parse(f)))` equals
    /// `parse(f)`.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.values {
            out.push_str(&format!("{key} {}\n", value.raw));
        }
        out
    }
}

/// Key names the model/trainer consumers recognize.
pub const KNOWN_KEYS: &[&str] = &[
    "num-layers",
    "hidden-size",
    "num-attention-heads",
    "rotary-pct",
    "rotary-base",
    "max-position-embeddings",
    "vocab-size",
    "no-weight-tying",
    "seed",
    "train-iters",
    "lr-decay-style",
    "lr-decay-iters",
    "warmup",
    "weight-decay",
    "min-lr",
    "optimizer.params.lr",
    "optimizer.params.betas",
    "optimizer.params.eps",
    "gradient-clipping",
    "save-interval",
    "eval-interval",
    "log-interval",
    "seq-length",
    "split",
    "train-batch-contexts",
    "train-micro-batch-size-per-gpu",
    "gradient-accumulation-steps",
];
