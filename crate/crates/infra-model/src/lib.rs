//! Analytic models of the systems-side bookkeeping: 3D-parallel layout
//! feasibility over a cluster, all-reduce counts for serial vs parallel
//! residual blocks, throughput arithmetic, and generation-mix carbon
//! accounting. Everything here is a pure function.

use std::fmt;
use std::str::FromStr;

#[derive(Debug)]
pub enum InfraError {
    NotDivisible {
        total_gpus: u64,
        model_ways: u64,
        remainder: u64,
    },
    SharesDoNotSumToOne {
        sum: f64,
    },
    NegativeInput(String),
    BadMixLine {
        line: usize,
        reason: String,
    },
    ZeroLayers,
}

impl fmt::Display for InfraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfraError::NotDivisible {
                total_gpus,
                model_ways,
                remainder,
            } => write!(
                f,
                "tp*pp = {model_ways} does not divide {total_gpus} GPUs (remainder {remainder})"
            ),
            InfraError::SharesDoNotSumToOne { sum } => {
                write!(f, "generation shares sum to {sum}, expected 1 within 2e-3")
            }
            InfraError::NegativeInput(what) => write!(f, "{what} must be non-negative"),
            InfraError::BadMixLine { line, reason } => {
                write!(f, "bad mix file line {line}: {reason}")
            }
            InfraError::ZeroLayers => write!(f, "layer count must be at least 1"),
        }
    }
}

impl std::error::Error for InfraError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterTopology {
    pub nodes: u64,
    pub gpus_per_node: u64,
}

impl ClusterTopology {
    pub fn total_gpus(&self) -> u64 {
        self.nodes * self.gpus_per_node
    }
}

/// A tensor x pipeline x data parallel assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParallelLayout {
    pub tp: u64,
    pub pp: u64,
    pub dp: u64,
    /// One model replica (tp*pp GPUs) tiles evenly inside a node, so the
    /// communication-heavy traffic never crosses node boundaries.
    pub intra_node: bool,
}

/// Place `tp`-way tensor and `pp`-way pipeline parallelism on a cluster;
/// data parallelism takes whatever factor remains.
pub fn derive_layout(
    topo: ClusterTopology,
    tp: u64,
    pp: u64,
) -> Result<ParallelLayout, InfraError> {
    let total = topo.total_gpus();
    let ways = tp * pp;
    if ways == 0 || !total.is_multiple_of(ways) {
        return Err(InfraError::NotDivisible {
            total_gpus: total,
            model_ways: ways,
            remainder: if ways == 0 { total } else { total % ways },
        });
    }
    Ok(ParallelLayout {
        tp,
        pp,
        dp: total / ways,
        intra_node: ways <= topo.gpus_per_node && topo.gpus_per_node.is_multiple_of(ways),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualMode {
    /// Attention then feed-forward in sequence: two residual additions
    /// per layer, each needing its own all-reduce under op sharding.
    Serial,
    /// Attention and feed-forward summed locally before one reduction.
    Parallel,
}

/// All-reduce operations per forward and backward pass, counting the
/// residual-boundary reductions only.
pub fn allreduce_count(num_layers: u64, mode: ResidualMode) -> Result<(u64, u64), InfraError> {
    if num_layers == 0 {
        return Err(InfraError::ZeroLayers);
    }
    let per_direction = match mode {
        ResidualMode::Serial => 2 * num_layers,
        ResidualMode::Parallel => num_layers,
    };
    Ok((per_direction, per_direction))
}

/// One generation source: share of total energy and carbon intensity in
/// t CO2 per MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySource {
    pub name: String,
    pub share: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyMix {
    pub sources: Vec<EnergySource>,
}

impl EnergyMix {
    /// Shares must cover the whole supply. Published tables round each
    /// share to a tenth of a percent (the reference mix sums to 100.10%),
    /// so the check allows a 2e-3 slack.
    pub fn validate(&self) -> Result<(), InfraError> {
        let sum: f64 = self.sources.iter().map(|s| s.share).sum();
        if (sum - 1.0).abs() > 2e-3 {
            return Err(InfraError::SharesDoNotSumToOne { sum });
        }
        for s in &self.sources {
            if s.intensity < 0.0 {
                return Err(InfraError::NegativeInput(format!(
                    "intensity of {}",
                    s.name
                )));
            }
            if s.share < 0.0 {
                return Err(InfraError::NegativeInput(format!("share of {}", s.name)));
            }
        }
        Ok(())
    }

    /// Parse `name share intensity` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, InfraError> {
        let mut sources = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(InfraError::BadMixLine {
                    line: i + 1,
                    reason: "expected `name share intensity`".into(),
                });
            }
            let share = f64::from_str(parts[1]).map_err(|_| InfraError::BadMixLine {
                line: i + 1,
                reason: format!("bad share `{}`", parts[1]),
            })?;
            let intensity = f64::from_str(parts[2]).map_err(|_| InfraError::BadMixLine {
                line: i + 1,
                reason: format!("bad intensity `{}`", parts[2]),
            })?;
            sources.push(EnergySource {
                name: parts[0].to_string(),
                share,
                intensity,
            });
        }
        Ok(EnergyMix { sources })
    }

    /// The seven-source mix of the reference training run.
    pub fn reference() -> Self {
        let raw = [
            ("Coal", 0.3040, 0.95),
            ("Gas", 0.3130, 0.6078),
            ("Hydroelectric", 0.0130, 0.0),
            ("Nuclear", 0.1740, 0.0),
            ("Solar", 0.0030, 0.0),
            ("Wind", 0.1810, 0.0),
            ("OtherRenewables", 0.0130, 0.0),
        ];
        EnergyMix {
            sources: raw
                .iter()
                .map(|&(name, share, intensity)| EnergySource {
                    name: name.to_string(),
                    share,
                    intensity,
                })
                .collect(),
        }
    }
}

/// Share-weighted average carbon intensity, t CO2 per MWh.
pub fn mix_intensity(mix: &EnergyMix) -> Result<f64, InfraError> {
    mix.validate()?;
    Ok(mix.sources.iter().map(|s| s.share * s.intensity).sum())
}

/// Total emissions for `mwh` of energy at the given intensity.
pub fn emissions(mwh: f64, intensity: f64) -> Result<f64, InfraError> {
    if mwh < 0.0 {
        return Err(InfraError::NegativeInput("energy".into()));
    }
    if intensity < 0.0 {
        return Err(InfraError::NegativeInput("intensity".into()));
    }
    Ok(mwh * intensity)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport {
    pub aggregate_tflops: f64,
    pub tokens_per_sec: f64,
}

/// Pure bookkeeping: aggregate device throughput and token rate.
pub fn throughput_report(
    gpu_count: u64,
    per_gpu_tflops: f64,
    step_tokens: u64,
    step_time_secs: f64,
) -> Result<ThroughputReport, InfraError> {
    if per_gpu_tflops < 0.0 {
        return Err(InfraError::NegativeInput("per-GPU TFLOPS".into()));
    }
    if step_time_secs <= 0.0 {
        return Err(InfraError::NegativeInput("step time".into()));
    }
    Ok(ThroughputReport {
        aggregate_tflops: gpu_count as f64 * per_gpu_tflops,
        tokens_per_sec: step_tokens as f64 / step_time_secs,
    })
}
