//! Saliency maps: per-key probability mass averaged over all queries.

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Tolerance on row and map sums.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Non-negative weights over a key grid, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap<T> {
    height: usize,
    width: usize,
    weights: Vec<T>,
}

impl<T: Scalar> SaliencyMap<T> {
    pub fn new(height: usize, width: usize, weights: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return invalid("saliency grid has a zero dimension");
        }
        if weights.len() != height * width {
            return invalid(format!(
                "saliency has {} weights for a {height}x{width} grid",
                weights.len()
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return invalid("saliency weights must be finite and non-negative");
        }
        let sum: T = weights.iter().copied().sum();
        if (sum.to_f64_lossy() - 1.0).abs() > SUM_TOLERANCE {
            return invalid(format!("saliency weights sum to {sum}, not 1"));
        }
        Ok(Self {
            height,
            width,
            weights,
        })
    }

    pub fn uniform(height: usize, width: usize) -> Result<Self> {
        let w = T::one() / T::from_usize_lossy(height * width);
        Self::new(height, width, vec![w; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.weights[row * self.width + col]
    }

    pub fn sum(&self) -> T {
        self.weights.iter().copied().sum()
    }
}

/// Averages a row-stochastic `N_q × N_k` attention map over its query rows.
pub fn saliency_from_map<T: Scalar>(
    attention_map: &Matrix<T>,
    key_height: usize,
    key_width: usize,
) -> Result<SaliencyMap<T>> {
    if attention_map.cols() != key_height * key_width {
        return invalid(format!(
            "attention map has {} keys, grid {key_height}x{key_width} needs {}",
            attention_map.cols(),
            key_height * key_width
        ));
    }
    if attention_map.rows() == 0 {
        return invalid("attention map has no query rows");
    }
    for q in 0..attention_map.rows() {
        let s: T = attention_map.row(q).iter().copied().sum();
        if (s.to_f64_lossy() - 1.0).abs() > SUM_TOLERANCE {
            return invalid(format!("attention map row {q} sums to {s}"));
        }
    }
    let mut weights = vec![T::zero(); attention_map.cols()];
    for q in 0..attention_map.rows() {
        for (w, &p) in weights.iter_mut().zip(attention_map.row(q)) {
            *w = *w + p;
        }
    }
    let n_q = T::from_usize_lossy(attention_map.rows());
    for w in &mut weights {
        *w = *w / n_q;
    }
    SaliencyMap::new(key_height, key_width, weights)
}

/// Nearest-neighbour resampling onto a new grid, renormalised to sum one.
pub fn project_saliency<T: Scalar>(
    s: &SaliencyMap<T>,
    target_height: usize,
    target_width: usize,
) -> Result<SaliencyMap<T>> {
    if target_height == 0 || target_width == 0 {
        return invalid("projection target has a zero dimension");
    }
    if (target_height, target_width) == (s.height, s.width) {
        return Ok(s.clone());
    }
    let mut weights = Vec::with_capacity(target_height * target_width);
    for r in 0..target_height {
        let src_r = r * s.height / target_height;
        for c in 0..target_width {
            let src_c = c * s.width / target_width;
            weights.push(s.get(src_r, src_c));
        }
    }
    let sum: T = weights.iter().copied().sum();
    if sum <= T::zero() {
        // downsampling skipped every cell with mass
        return SaliencyMap::uniform(target_height, target_width);
    }
    for w in &mut weights {
        *w = *w / sum;
    }
    SaliencyMap::new(target_height, target_width, weights)
}
