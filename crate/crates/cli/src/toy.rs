//! Linear generator inversion problem with a known answer.

use ylg_core::inversion::{seeded_rng, truncated_normal, Identity, Linear, TensorShape};
use ylg_core::{Matrix64, Result};

/// `G(z) = A·z` with `A = I + (0.5/√dim)·U(-1, 1)` and target `A·z_true`.
#[derive(Debug, Clone)]
pub struct LinearToy {
    pub generator: Linear<f64>,
    pub embed: Identity,
    pub z_true: Vec<f64>,
    pub target: Vec<f64>,
}

impl LinearToy {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed ^ 0x9e37_79b9_7f4a_7c15);
        let spread = 0.5 / (dim as f64).sqrt();
        let a = Matrix64::identity(dim).add(&Matrix64::random(dim, dim, spread, &mut rng))?;
        let z_true = truncated_normal(dim, 2.0, seed.wrapping_add(1))?;
        let column = Matrix64::from_vec(dim, 1, z_true.clone())?;
        let target = a.matmul(&column)?.into_vec();
        Ok(Self {
            generator: Linear::new(a, TensorShape::vector(dim))?,
            embed: Identity::new(TensorShape::vector(dim)),
            z_true,
            target,
        })
    }

    pub fn distance(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.z_true)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}
