//! Small numeric building blocks shared by the GCN and the fusion head.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Uniform in `[-l, l]` with `l = sqrt(6 / (rows + cols))`.
pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    if rows + cols == 0 {
        return Array2::zeros((rows, cols));
    }
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
}

/// Inverted dropout: kept entries are scaled by `1 / (1 - rate)` so the
/// evaluation path needs no rescaling.
#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f64,
    rng: ChaCha8Rng,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Self {
        Self::with_rng(rate, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(rate: f64, rng: ChaCha8Rng) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        Dropout { rate, rng }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// A fresh scaled keep-mask, or `None` when the rate is zero.
    pub fn mask(&mut self, rows: usize, cols: usize) -> Option<Array2<f64>> {
        if self.rate == 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - self.rate);
        let rate = self.rate;
        let rng = &mut self.rng;
        Some(Array2::from_shape_simple_fn((rows, cols), || {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        }))
    }
}

pub(crate) fn all_finite<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> bool {
    values.into_iter().all(|v| v.is_finite())
}
