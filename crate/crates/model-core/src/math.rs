//! Minimal dense linear algebra and sampling support.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(&row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// `out = w @ x` with `w` of shape `(out_dim, in_dim)`.
pub fn mat_vec(w: &Matrix, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.cols, x.len());
    let mut out = vec![0.0; w.rows];
    for r in 0..w.rows {
        let row = w.row(r);
        let mut acc = 0.0;
        for c in 0..w.cols {
            acc += row[c] * x[c];
        }
        out[r] = acc;
    }
    out
}

/// `out = w^T @ y` with `w` of shape `(out_dim, in_dim)`, `y` of `out_dim`.
pub fn mat_tvec(w: &Matrix, y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.rows, y.len());
    let mut out = vec![0.0; w.cols];
    for r in 0..w.rows {
        let row = w.row(r);
        let yr = y[r];
        for c in 0..w.cols {
            out[c] += yr * row[c];
        }
    }
    out
}

/// Rank-one update `dw += y ⊗ x` for `dw` of shape `(len(y), len(x))`.
pub fn accumulate_outer(dw: &mut Matrix, y: &[f64], x: &[f64]) {
    debug_assert_eq!(dw.rows, y.len());
    debug_assert_eq!(dw.cols, x.len());
    for r in 0..dw.rows {
        let row = dw.row_mut(r);
        let yr = y[r];
        for c in 0..row.len() {
            row[c] += yr * x[c];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn add_assign(a: &mut [f64], b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&l| l - log_sum).collect()
}

/// Numerically stable softmax; `NEG_INFINITY` entries get probability 0.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; scores.len()];
    }
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Deterministic standard-normal sampler (ChaCha8 + Box-Muller).
pub struct NormalSampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSampler {
    pub fn new(seed: u64) -> Self {
        NormalSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn unit_open(&mut self) -> f64 {
        // (0, 1], so the log below is finite.
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.unit_open();
        let u2 = self.unit_open();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mat_vec_and_transpose_agree_with_hand_computation() {
        let w = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(mat_vec(&w, &[1.0, 1.0]), vec![3.0, 7.0, 11.0]);
        assert_eq!(mat_tvec(&w, &[1.0, 0.0, 1.0]), vec![6.0, 8.0]);
    }

    #[test]
    fn log_softmax_of_uniform_is_neg_log_n() {
        let ls = log_softmax(&[0.0; 8]);
        for v in ls {
            assert!((v + (8.0f64).ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_handles_causal_neg_infinity() {
        let p = softmax(&[0.3, f64::NEG_INFINITY, 0.3]);
        assert_eq!(p[1], 0.0);
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normal_sampler_is_deterministic_and_standard() {
        let mut a = NormalSampler::new(7);
        let mut b = NormalSampler::new(7);
        let xs: Vec<f64> = (0..50_000).map(|_| a.sample()).collect();
        let ys: Vec<f64> = (0..50_000).map(|_| b.sample()).collect();
        assert_eq!(xs, ys);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
