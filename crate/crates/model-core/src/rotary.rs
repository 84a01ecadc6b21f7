//! Rotary position embeddings, applied to a leading slice of each head.

use crate::error::ModelError;
use crate::math::dot;

/// Frequencies `theta_i = base^(-2i / d_rot)` for `i = 0 .. d_rot/2`.
pub fn rotary_thetas(d_rot: usize, base: f64) -> Result<Vec<f64>, ModelError> {
    if !d_rot.is_multiple_of(2) {
        return Err(ModelError::OddRotaryDim { d_rot });
    }
    Ok((0..d_rot / 2)
        .map(|i| base.powf(-2.0 * i as f64 / d_rot as f64))
        .collect())
}

/// Precomputed angles for every position up to `max_positions`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotaryCache {
    thetas: Vec<f64>,
    sin: Vec<Vec<f64>>,
    cos: Vec<Vec<f64>>,
    d_rot: usize,
    max_positions: usize,
}

impl RotaryCache {
    pub fn new(d_rot: usize, base: f64, max_positions: usize) -> Result<Self, ModelError> {
        let thetas = rotary_thetas(d_rot, base)?;
        let mut sin = Vec::with_capacity(max_positions);
        let mut cos = Vec::with_capacity(max_positions);
        for pos in 0..max_positions {
            let angles: Vec<f64> = thetas.iter().map(|t| t * pos as f64).collect();
            sin.push(angles.iter().map(|a| a.sin()).collect());
            cos.push(angles.iter().map(|a| a.cos()).collect());
        }
        Ok(RotaryCache {
            thetas,
            sin,
            cos,
            d_rot,
            max_positions,
        })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn rotary_dims(&self) -> usize {
        self.d_rot
    }

    pub fn max_positions(&self) -> usize {
        self.max_positions
    }
}

/// Rotate the first `d_rot` dimensions of a per-head vector by the
/// position-`m` angles; interleaved pairs `(2i, 2i+1)` form each 2D
/// rotation block. Remaining dimensions pass through untouched.
///
/// At position 0 every angle is zero and the input is returned bitwise
/// unchanged.
pub fn apply_rotary(
    x: &[f64],
    position: usize,
    cache: &RotaryCache,
) -> Result<Vec<f64>, ModelError> {
    if position >= cache.max_positions {
        return Err(ModelError::PositionOutOfRange {
            position,
            max_positions: cache.max_positions,
        });
    }
    if x.len() < cache.d_rot {
        return Err(ModelError::ShapeMismatch(format!(
            "vector of length {} shorter than rotary dims {}",
            x.len(),
            cache.d_rot
        )));
    }
    let mut out = x.to_vec();
    rotate_in_place(&mut out, position, cache, false);
    Ok(out)
}

/// Shared kernel; `inverse` rotates by the negated angle (the transpose),
/// used by backpropagation.
pub(crate) fn rotate_in_place(x: &mut [f64], position: usize, cache: &RotaryCache, inverse: bool) {
    let sin = &cache.sin[position];
    let cos = &cache.cos[position];
    for i in 0..cache.d_rot / 2 {
        let (c, s) = (cos[i], if inverse { -sin[i] } else { sin[i] });
        let a = x[2 * i];
        let b = x[2 * i + 1];
        x[2 * i] = a * c - b * s;
        x[2 * i + 1] = a * s + b * c;
    }
}

/// Causally masked, scaled attention scores for one head.
///
/// `score[m][n] = dot(R(pos_m) q_m, R(pos_n) k_n) / sqrt(head_dim)` for
/// `n <= m`; masked entries hold negative infinity. Rotation composition
/// makes the result depend on positions only through `pos_n - pos_m`.
pub fn attention_scores(
    q_states: &[Vec<f64>],
    k_states: &[Vec<f64>],
    positions: &[usize],
    cache: &RotaryCache,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let t = q_states.len();
    if k_states.len() != t || positions.len() != t {
        return Err(ModelError::ShapeMismatch(format!(
            "got {} queries, {} keys, {} positions",
            t,
            k_states.len(),
            positions.len()
        )));
    }
    let head_dim = q_states.first().map_or(0, |q| q.len());
    for (label, states) in [("query", q_states), ("key", k_states)] {
        for s in states {
            if s.len() != head_dim {
                return Err(ModelError::ShapeMismatch(format!(
                    "{label} vectors must all have length {head_dim}"
                )));
            }
        }
    }
    let scale = 1.0 / (head_dim as f64).sqrt();
    let rotated_q: Vec<Vec<f64>> = q_states
        .iter()
        .zip(positions)
        .map(|(q, &p)| apply_rotary(q, p, cache))
        .collect::<Result<_, _>>()?;
    let rotated_k: Vec<Vec<f64>> = k_states
        .iter()
        .zip(positions)
        .map(|(k, &p)| apply_rotary(k, p, cache))
        .collect::<Result<_, _>>()?;
    let mut scores = vec![vec![f64::NEG_INFINITY; t]; t];
    for m in 0..t {
        for n in 0..=m {
            scores[m][n] = dot(&rotated_q[m], &rotated_k[n]) * scale;
        }
    }
    Ok(scores)
}
