//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the attention or loss code paths it is used to
//! check; everything is recomputed from the defining formulas with plain
//! nested loops over `Vec<Vec<f64>>`.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ylg_core::{AttentionMask, Matrix};

pub type Grid = Vec<Vec<f64>>;

/// Denominator floor of [`rel_err`]; below it the comparison is absolute.
pub const REL_FLOOR: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Grid {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn to_matrix(g: &Grid) -> Matrix<f64> {
    let rows = g.len();
    let cols = g[0].len();
    Matrix::from_fn(rows, cols, |r, c| g[r][c])
}

pub fn to_grid(m: &Matrix<f64>) -> Grid {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn matmul(a: &Grid, b: &Grid) -> Grid {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// `softmax(x·wq · (y·wk)ᵀ with −∞ where masked) · y·wv`.
pub fn reference_attention(
    x: &Grid,
    y: &Grid,
    wq: &Grid,
    wk: &Grid,
    wv: &Grid,
    mask: &AttentionMask,
) -> (Grid, Grid) {
    let q = matmul(x, wq);
    let k = matmul(y, wk);
    let v = matmul(y, wv);
    let (nq, nk) = (q.len(), k.len());
    let mut probs = vec![vec![0.0; nk]; nq];
    for i in 0..nq {
        let logits: Vec<f64> = (0..nk)
            .map(|j| {
                if mask.get(i, j) {
                    q[i].iter().zip(&k[j]).map(|(a, b)| a * b).sum()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for j in 0..nk {
            probs[i][j] = exps[j] / total;
        }
    }
    (matmul(&probs, &v), probs)
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central difference of `f` along every entry of `param`.
pub fn numeric_gradient(param: &Grid, eps: f64, mut f: impl FnMut(&Grid) -> f64) -> Grid {
    let mut probe = param.clone();
    let mut grad = vec![vec![0.0; param[0].len()]; param.len()];
    for r in 0..param.len() {
        for c in 0..param[0].len() {
            probe[r][c] = param[r][c] + eps;
            let plus = f(&probe);
            probe[r][c] = param[r][c] - eps;
            let minus = f(&probe);
            probe[r][c] = param[r][c];
            grad[r][c] = (plus - minus) / (2.0 * eps);
        }
    }
    grad
}

pub fn max_rel_err(analytic: &Matrix<f64>, numeric: &Grid) -> f64 {
    let mut worst: f64 = 0.0;
    for (r, row) in numeric.iter().enumerate() {
        for (c, &n) in row.iter().enumerate() {
            worst = worst.max(rel_err(analytic[(r, c)], n));
        }
    }
    worst
}

/// Boolean matrix product over (or, and): reach[s][t] after composing masks.
pub fn boolean_reachability(steps: &[AttentionMask]) -> Vec<Vec<bool>> {
    let n = steps[0].n_key();
    let mut reach: Vec<Vec<bool>> = (0..n).map(|s| (0..n).map(|t| s == t).collect()).collect();
    for m in steps {
        let mut next = vec![vec![false; m.n_query()]; n];
        for s in 0..n {
            for v in 0..m.n_query() {
                next[s][v] = (0..m.n_key()).any(|u| reach[s][u] && m.get(v, u));
            }
        }
        reach = next;
    }
    reach
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &Grid, b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    x
}
