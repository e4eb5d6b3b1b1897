//! Structural summary of a factorization.

use serde::Serialize;
use ylg_core::ifg::{build_ifg, full_information};
use ylg_core::{PatternFactorization, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub pattern: String,
    pub n: usize,
    pub n_query: usize,
    pub stride: usize,
    /// `"HxW"` when the steps were re-indexed by the ESA walk.
    pub esa: Option<String>,
    pub step_true_counts: Vec<usize>,
    pub total_true: usize,
    /// Fraction of mask entries that are true, over all steps.
    pub density: f64,
    pub full_information: bool,
    /// First unreachable `(source input, target output)` pair.
    pub witness: Option<(usize, usize)>,
    /// `total_true / (n·√n)`.
    pub sparsity_ratio: f64,
}

impl StatsReport {
    /// Every `n`-row query block of an expanded final step is checked on its
    /// own; witness targets are reported as global query indices.
    pub fn of(f: &PatternFactorization) -> Result<Self> {
        let n = f.n();
        let mut witness = None;
        for block in 0..f.query_block_count() {
            let verdict = full_information(&build_ifg(&f.query_block(block)?)?);
            if let Some((s, t)) = verdict.witness {
                witness = Some((s, block * n + t));
                break;
            }
        }
        let step_true_counts = f.step_true_counts();
        let total_true = f.total_true();
        let entries: usize = f.steps().iter().map(|m| m.n_query() * m.n_key()).sum();
        let nf = n as f64;
        Ok(Self {
            pattern: f.kind().to_string(),
            n,
            n_query: f.query_count(),
            stride: f.stride(),
            esa: f.grid().map(|(h, w)| format!("{h}x{w}")),
            step_true_counts,
            total_true,
            density: total_true as f64 / entries as f64,
            full_information: witness.is_none(),
            witness,
            sparsity_ratio: total_true as f64 / (nf * nf.sqrt()),
        })
    }
}
