//! Reference dense and masked attention with analytic gradients.
//!
//! Queries come from `x`, keys and values from `y`:
//! `X' = softmax(x·W_Q · (y·W_K)ᵀ) · y·W_V`, softmax along each row.
//! Masked positions are left out of the softmax normalisation entirely, so
//! their probabilities are exactly zero. Logits are unscaled unless
//! [`LogitScale::InverseSqrtDim`] is requested.

use crate::error::{invalid, Error, Result};
use crate::mask::AttentionMask;
use crate::matrix::{dot, Matrix};
use crate::patterns::PatternFactorization;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogitScale {
    #[default]
    None,
    /// Divide logits by `√E`, `E` the query/key width.
    InverseSqrtDim,
}

/// Projection matrices `W_Q (E_X×E)`, `W_K (E_Y×E)`, `W_V (E_Y×E_V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<T> {
    pub w_q: Matrix<T>,
    pub w_k: Matrix<T>,
    pub w_v: Matrix<T>,
}

impl<T: Scalar> AttentionWeights<T> {
    pub fn new(w_q: Matrix<T>, w_k: Matrix<T>, w_v: Matrix<T>) -> Result<Self> {
        if w_q.cols() != w_k.cols() {
            return invalid(format!(
                "query width {} differs from key width {}",
                w_q.cols(),
                w_k.cols()
            ));
        }
        if w_k.rows() != w_v.rows() {
            return invalid("key and value projections read different input widths");
        }
        Ok(Self { w_q, w_k, w_v })
    }

    /// Entries uniform in `[-scale, scale]`.
    pub fn random<R: rand::Rng + ?Sized>(
        e_x: usize,
        e_y: usize,
        e: usize,
        e_v: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            w_q: Matrix::random(e_x, e, scale, rng),
            w_k: Matrix::random(e_y, e, scale, rng),
            w_v: Matrix::random(e_y, e_v, scale, rng),
        }
    }

    pub fn value_width(&self) -> usize {
        self.w_v.cols()
    }

    fn is_finite(&self) -> bool {
        self.w_q.is_finite() && self.w_k.is_finite() && self.w_v.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput<T> {
    /// `N_X × E_V` updated representation.
    pub output: Matrix<T>,
    /// `N_X × N_Y` row-stochastic attention probabilities.
    pub attention_map: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadOutput<T> {
    pub heads: Vec<AttentionOutput<T>>,
    /// Head outputs concatenated along the feature axis, in head order.
    pub output: Matrix<T>,
}

/// Gradients of a scalar loss with respect to every attention input.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGradients<T> {
    pub x: Matrix<T>,
    pub y: Matrix<T>,
    pub w_q: Matrix<T>,
    pub w_k: Matrix<T>,
    pub w_v: Matrix<T>,
}

struct Projections<T> {
    q: Matrix<T>,
    k: Matrix<T>,
    v: Matrix<T>,
    probs: Matrix<T>,
    scale: T,
}

fn check_inputs<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    w: &AttentionWeights<T>,
    mask: &AttentionMask,
) -> Result<()> {
    if x.rows() == 0 || x.cols() == 0 || y.rows() == 0 || y.cols() == 0 {
        return invalid("token matrices must be non-empty");
    }
    if x.cols() != w.w_q.rows() || y.cols() != w.w_k.rows() || y.cols() != w.w_v.rows() {
        return invalid(format!(
            "inputs {}x{} / {}x{} do not match projections",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        ));
    }
    if w.w_q.cols() != w.w_k.cols() {
        return invalid("query and key projections have different widths");
    }
    if mask.n_query() != x.rows() || mask.n_key() != y.rows() {
        return invalid(format!(
            "mask {}x{} does not match {} queries and {} keys",
            mask.n_query(),
            mask.n_key(),
            x.rows(),
            y.rows()
        ));
    }
    if !x.is_finite() || !y.is_finite() || !w.is_finite() {
        return invalid("attention inputs must be finite");
    }
    if let Some(row) = mask.first_empty_row() {
        return Err(Error::FullyMaskedRow {
            row,
            rows: mask.n_query(),
            cols: mask.n_key(),
        });
    }
    Ok(())
}

/// Row softmax over the attended entries of `logits`; other entries are 0.
fn masked_softmax<T: Scalar>(logits: &Matrix<T>, mask: &AttentionMask) -> Matrix<T> {
    let mut probs = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let allowed = mask.row(r);
        let max = row
            .iter()
            .zip(allowed)
            .filter(|(_, &a)| a)
            .fold(T::neg_infinity(), |m, (&v, _)| m.max(v));
        let out = probs.row_mut(r);
        let mut sum = T::zero();
        for ((o, &v), &a) in out.iter_mut().zip(row).zip(allowed) {
            if a {
                *o = (v - max).exp();
                sum = sum + *o;
            }
        }
        for o in out.iter_mut() {
            *o = *o / sum;
        }
    }
    probs
}

fn forward<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    w: &AttentionWeights<T>,
    mask: &AttentionMask,
    scale: LogitScale,
) -> Result<Projections<T>> {
    check_inputs(x, y, w, mask)?;
    let q = x.matmul(&w.w_q)?;
    let k = y.matmul(&w.w_k)?;
    let v = y.matmul(&w.w_v)?;
    let scale = match scale {
        LogitScale::None => T::one(),
        LogitScale::InverseSqrtDim => T::one() / T::from_usize_lossy(w.w_q.cols()).sqrt(),
    };
    let logits = Matrix::from_fn(q.rows(), k.rows(), |i, j| {
        if mask.get(i, j) {
            dot(q.row(i), k.row(j)) * scale
        } else {
            T::zero()
        }
    });
    let probs = masked_softmax(&logits, mask);
    Ok(Projections {
        q,
        k,
        v,
        probs,
        scale,
    })
}

pub fn dense_attention<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    w: &AttentionWeights<T>,
) -> Result<AttentionOutput<T>> {
    masked_attention(x, y, w, &AttentionMask::dense(x.rows(), y.rows()))
}

pub fn masked_attention<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    w: &AttentionWeights<T>,
    mask: &AttentionMask,
) -> Result<AttentionOutput<T>> {
    masked_attention_scaled(x, y, w, mask, LogitScale::None)
}

pub fn masked_attention_scaled<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    w: &AttentionWeights<T>,
    mask: &AttentionMask,
    scale: LogitScale,
) -> Result<AttentionOutput<T>> {
    let p = forward(x, y, w, mask, scale)?;
    Ok(AttentionOutput {
        output: p.probs.matmul(&p.v)?,
        attention_map: p.probs,
    })
}

/// Independent heads over the same inputs, concatenated in head order.
pub fn multihead_attention<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    heads: &[(AttentionWeights<T>, AttentionMask)],
) -> Result<MultiHeadOutput<T>> {
    let Some((first, _)) = heads.first() else {
        return invalid("multi-head attention needs at least one head");
    };
    let width = first.value_width();
    if let Some(h) = heads.iter().position(|(w, _)| w.value_width() != width) {
        return invalid(format!(
            "head {h} has value width {}, expected {width}",
            heads[h].0.value_width()
        ));
    }
    let outputs = heads
        .iter()
        .map(|(w, m)| masked_attention(x, y, w, m))
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<Matrix<T>> = outputs.iter().map(|o| o.output.clone()).collect();
    Ok(MultiHeadOutput {
        output: Matrix::hcat(&parts)?,
        heads: outputs,
    })
}

/// Masked self-attention with step 1, then again on its output with step 2.
pub fn two_step_attention<T: Scalar>(
    x: &Matrix<T>,
    f: &PatternFactorization,
    w1: &AttentionWeights<T>,
    w2: &AttentionWeights<T>,
) -> Result<Matrix<T>> {
    if f.step_count() != 2 || !f.is_square() {
        return invalid("two-step attention needs a square two-step factorization");
    }
    let hidden = masked_attention(x, x, w1, &f.steps()[0])?.output;
    Ok(masked_attention(&hidden, &hidden, w2, &f.steps()[1])?.output)
}

pub fn attention_backward<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    w: &AttentionWeights<T>,
    mask: &AttentionMask,
    upstream: &Matrix<T>,
) -> Result<AttentionGradients<T>> {
    attention_backward_scaled(x, y, w, mask, upstream, LogitScale::None)
}

/// Reverse-mode gradients of `masked_attention_scaled` given `∂L/∂X'`.
pub fn attention_backward_scaled<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    w: &AttentionWeights<T>,
    mask: &AttentionMask,
    upstream: &Matrix<T>,
    scale: LogitScale,
) -> Result<AttentionGradients<T>> {
    let p = forward(x, y, w, mask, scale)?;
    if upstream.shape() != (x.rows(), w.value_width()) {
        return invalid(format!(
            "upstream gradient {}x{} does not match output {}x{}",
            upstream.rows(),
            upstream.cols(),
            x.rows(),
            w.value_width()
        ));
    }
    // O = P·V
    let d_probs = upstream.matmul_transposed(&p.v)?;
    let d_v = p.probs.transposed_matmul(upstream)?;
    // softmax Jacobian; masked entries have P = 0 and stay 0
    let mut d_logits = Matrix::zeros(p.probs.rows(), p.probs.cols());
    for r in 0..p.probs.rows() {
        let probs = p.probs.row(r);
        let dp = d_probs.row(r);
        let inner = dot(probs, dp);
        for ((o, &pr), &g) in d_logits.row_mut(r).iter_mut().zip(probs).zip(dp) {
            *o = pr * (g - inner) * p.scale;
        }
    }
    // logits = Q·Kᵀ
    let d_q = d_logits.matmul(&p.k)?;
    let d_k = d_logits.transposed_matmul(&p.q)?;
    Ok(AttentionGradients {
        x: d_q.matmul_transposed(&w.w_q)?,
        y: d_k
            .matmul_transposed(&w.w_k)?
            .add(&d_v.matmul_transposed(&w.w_v)?)?,
        w_q: x.transposed_matmul(&d_q)?,
        w_k: y.transposed_matmul(&d_k)?,
        w_v: y.transposed_matmul(&d_v)?,
    })
}
