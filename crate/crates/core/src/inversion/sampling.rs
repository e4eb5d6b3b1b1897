//! Truncated normal latent initialisation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

/// Seeded generator used for every reproducible draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw, redrawn while `|value| > threshold`.
pub fn truncated_normal_with<R: Rng + ?Sized>(
    dim: usize,
    threshold: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if threshold.is_nan() || threshold <= 0.0 {
        return invalid(format!("truncation threshold {threshold} must be positive"));
    }
    Ok((0..dim)
        .map(|_| loop {
            let v: f64 = rng.sample(StandardNormal);
            if v.abs() <= threshold {
                break v;
            }
        })
        .collect())
}

pub fn truncated_normal(dim: usize, threshold: f64, seed: u64) -> Result<Vec<f64>> {
    truncated_normal_with(dim, threshold, &mut seeded_rng(seed))
}
