//! Versioned binary checkpoint container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes   b"NXKT"
//! version  u32       1
//! config   u32 entry count, then per entry:
//!          u16 key length, key bytes (UTF-8),
//!          u16 value length, value bytes (UTF-8)
//! tensors  u32 tensor count, then per tensor:
//!          u16 name length, name bytes (UTF-8),
//!          u64 rows, u64 cols,
//!          rows*cols f64 values, row-major little-endian
//! ```
//!
//! Config keys follow the training-config key style: `num-layers`,
//! `hidden-size`, `num-attention-heads`, `rotary-pct`, `rotary-base`,
//! `max-position-embeddings`, `vocab-size`, `no-weight-tying`, `seed`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::config::ModelConfig;
use crate::model::LMModel;

const MAGIC: &[u8; 4] = b"NXKT";
const VERSION: u32 = 1;

#[derive(Debug)]
pub enum CheckpointError {
    Io(std::io::Error),
    Format(String),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "io error: {e}"),
            CheckpointError::Format(msg) => write!(f, "bad checkpoint: {msg}"),
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<std::io::Error> for CheckpointError {
    fn from(e: std::io::Error) -> Self {
        CheckpointError::Io(e)
    }
}

fn config_entries(config: &ModelConfig) -> Vec<(String, String)> {
    vec![
        ("num-layers".into(), config.num_layers.to_string()),
        ("hidden-size".into(), config.hidden_size.to_string()),
        ("num-attention-heads".into(), config.num_heads.to_string()),
        ("rotary-pct".into(), format!("{:?}", config.rotary_pct)),
        ("rotary-base".into(), format!("{:?}", config.rotary_base)),
        (
            "max-position-embeddings".into(),
            config.max_positions.to_string(),
        ),
        ("vocab-size".into(), config.vocab_size.to_string()),
        ("no-weight-tying".into(), (!config.weight_tying).to_string()),
        ("seed".into(), config.seed.to_string()),
    ]
}

fn config_from_entries(map: &BTreeMap<String, String>) -> Result<ModelConfig, CheckpointError> {
    let get = |key: &str| {
        map.get(key)
            .ok_or_else(|| CheckpointError::Format(format!("missing config key `{key}`")))
    };
    let parse_usize = |key: &str| -> Result<usize, CheckpointError> {
        get(key)?
            .parse()
            .map_err(|_| CheckpointError::Format(format!("config key `{key}` is not a count")))
    };
    let parse_f64 = |key: &str| -> Result<f64, CheckpointError> {
        get(key)?
            .parse()
            .map_err(|_| CheckpointError::Format(format!("config key `{key}` is not a number")))
    };
    Ok(ModelConfig {
        num_layers: parse_usize("num-layers")?,
        hidden_size: parse_usize("hidden-size")?,
        num_heads: parse_usize("num-attention-heads")?,
        rotary_pct: parse_f64("rotary-pct")?,
        rotary_base: parse_f64("rotary-base")?,
        max_positions: parse_usize("max-position-embeddings")?,
        vocab_size: parse_usize("vocab-size")?,
        weight_tying: get("no-weight-tying")? != "true",
        seed: get("seed")?
            .parse()
            .map_err(|_| CheckpointError::Format("config key `seed` is not an integer".into()))?,
    })
}

pub fn save_checkpoint(model: &LMModel, path: &Path) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(model, &mut w)
}

pub fn write_checkpoint<W: Write>(model: &LMModel, w: &mut W) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let entries = config_entries(&model.config);
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (k, v) in &entries {
        w.write_all(&(k.len() as u16).to_le_bytes())?;
        w.write_all(k.as_bytes())?;
        w.write_all(&(v.len() as u16).to_le_bytes())?;
        w.write_all(v.as_bytes())?;
    }

    let mut tensors: Vec<(String, usize, usize, Vec<u8>)> = Vec::new();
    model.for_each_param(|name, _, data| {
        let (rows, cols) = tensor_shape(model, name, data.len());
        let mut bytes = Vec::with_capacity(data.len() * 8);
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        tensors.push((name.to_string(), rows, cols, bytes));
    });
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, rows, cols, bytes) in tensors {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(rows as u64).to_le_bytes())?;
        w.write_all(&(cols as u64).to_le_bytes())?;
        w.write_all(&bytes)?;
    }
    Ok(())
}

/// Shape metadata for a named tensor; vectors store as one row.
fn tensor_shape(model: &LMModel, name: &str, len: usize) -> (usize, usize) {
    let d = model.config.hidden_size;
    if name == "embedding" || name == "output_proj" {
        (model.config.vocab_size, d)
    } else if name.ends_with("ff_up") {
        (4 * d, d)
    } else if name.ends_with("ff_down") {
        (d, 4 * d)
    } else if name.ends_with("w_q")
        || name.ends_with("w_k")
        || name.ends_with("w_v")
        || name.ends_with("w_o")
    {
        (d, d)
    } else {
        (1, len)
    }
}

pub fn load_checkpoint(path: &Path) -> Result<LMModel, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    read_checkpoint(&mut r)
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<LMModel, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::Format(
            "bad magic, not a checkpoint".into(),
        ));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(CheckpointError::Format(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let n_entries = read_u32(r)?;
    let mut map = BTreeMap::new();
    for _ in 0..n_entries {
        let key = read_string(r)?;
        let value = read_string(r)?;
        map.insert(key, value);
    }
    let config = config_from_entries(&map)?;
    config
        .validate()
        .map_err(|e| CheckpointError::Format(e.to_string()))?;
    let mut model = LMModel::zeros(&config).map_err(|e| CheckpointError::Format(e.to_string()))?;

    let n_tensors = read_u32(r)?;
    let mut loaded: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for _ in 0..n_tensors {
        let name = read_string(r)?;
        let rows = read_u64(r)? as usize;
        let cols = read_u64(r)? as usize;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| CheckpointError::Format(format!("tensor `{name}` shape overflows")))?;
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if loaded.insert(name.clone(), values).is_some() {
            return Err(CheckpointError::Format(format!(
                "duplicate tensor `{name}`"
            )));
        }
    }

    let mut missing = Vec::new();
    model.for_each_param_mut(|name, _, data| match loaded.remove(name) {
        Some(values) if values.len() == data.len() => data.copy_from_slice(&values),
        Some(values) => missing.push(format!(
            "tensor `{name}` has {} values, expected {}",
            values.len(),
            data.len()
        )),
        None => missing.push(format!("missing tensor `{name}`")),
    });
    if let Some(problem) = missing.into_iter().next() {
        return Err(CheckpointError::Format(problem));
    }
    if let Some(extra) = loaded.keys().next() {
        return Err(CheckpointError::Format(format!(
            "unexpected tensor `{extra}`"
        )));
    }
    Ok(model)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let mut len_bytes = [0u8; 2];
    r.read_exact(&mut len_bytes)?;
    let len = u16::from_le_bytes(len_bytes) as usize;
    let mut bytes = vec![0u8; len];
    r.read_exact(&mut bytes)?;
    String::from_utf8(bytes).map_err(|_| CheckpointError::Format("non-UTF-8 string".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let cfg = ModelConfig {
            seed: 11,
            ..ModelConfig::toy()
        };
        let model = init_params(&cfg).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        let loaded = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let err = read_checkpoint(&mut &b"WRONG..."[..]);
        assert!(matches!(err, Err(CheckpointError::Format(_))));
    }

    #[test]
    fn truncated_file_is_an_io_error() {
        let cfg = ModelConfig::toy();
        let model = init_params(&cfg).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(read_checkpoint(&mut buf.as_slice()).is_err());
    }
}
