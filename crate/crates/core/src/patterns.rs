//! Two-step sparse attention factorizations.
//!
//! Every constructor returns a [`PatternFactorization`] whose steps are
//! square `n × n` masks with a fully attended diagonal. The Fixed and
//! Strided patterns are the causal one-dimensional originals; LTR, RTL and
//! StridedFull are their bidirectional extensions with full information.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::mask::AttentionMask;

/// Number of heads a deployed layer uses: each LTR/RTL step twice.
pub const HEAD_COUNT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    Fixed,
    Ltr,
    Rtl,
    Strided,
    StridedFull,
    /// Hand-assembled steps, e.g. read back from a file.
    Custom,
}

impl PatternKind {
    pub const ALL: [PatternKind; 5] = [
        PatternKind::Fixed,
        PatternKind::Ltr,
        PatternKind::Rtl,
        PatternKind::Strided,
        PatternKind::StridedFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Fixed => "fixed",
            PatternKind::Ltr => "ltr",
            PatternKind::Rtl => "rtl",
            PatternKind::Strided => "strided",
            PatternKind::StridedFull => "strided-full",
            PatternKind::Custom => "custom",
        }
    }

    /// Builds the named pattern; fails for [`PatternKind::Custom`].
    pub fn build(self, n: usize, stride: usize) -> Result<PatternFactorization> {
        match self {
            PatternKind::Fixed => make_fixed(n, stride),
            PatternKind::Ltr => make_ltr(n, stride),
            PatternKind::Rtl => make_rtl(n, stride),
            PatternKind::Strided => make_strided(n, stride),
            PatternKind::StridedFull => make_strided_full(n, stride),
            PatternKind::Custom => invalid("custom patterns have no constructor"),
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(PatternKind::Fixed),
            "ltr" => Ok(PatternKind::Ltr),
            "rtl" => Ok(PatternKind::Rtl),
            "strided" => Ok(PatternKind::Strided),
            "strided-full" | "strided_full" | "stridedfull" => Ok(PatternKind::StridedFull),
            "custom" => Ok(PatternKind::Custom),
            other => invalid(format!("unknown pattern '{other}'")),
        }
    }
}

/// Ordered attention steps over `n` key tokens.
///
/// All steps but the last are square `n × n`. The last step has `n` key
/// columns and a query count that is a multiple of `n`; it differs from `n`
/// only after [`expand_nonsquare`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternFactorization {
    kind: PatternKind,
    n: usize,
    stride: usize,
    steps: Vec<AttentionMask>,
    grid: Option<(usize, usize)>,
}

impl PatternFactorization {
    pub fn new(kind: PatternKind, stride: usize, steps: Vec<AttentionMask>) -> Result<Self> {
        let Some(first) = steps.first() else {
            return invalid("a factorization needs at least one step");
        };
        let n = first.n_key();
        if n == 0 {
            return invalid("a factorization needs at least one token");
        }
        let last = steps.len() - 1;
        for (i, step) in steps.iter().enumerate() {
            if step.n_key() != n {
                return invalid(format!("step {i} has {} keys, expected {n}", step.n_key()));
            }
            if i < last && !step.is_square() {
                return invalid(format!("step {i} is not square"));
            }
            if step.n_query() % n != 0 || step.n_query() == 0 {
                return invalid(format!(
                    "step {i} query count {} is not a multiple of {n}",
                    step.n_query()
                ));
            }
            step.validate()?;
        }
        Ok(Self {
            kind,
            n,
            stride,
            steps,
            grid: None,
        })
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    /// Key token count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn steps(&self) -> &[AttentionMask] {
        &self.steps
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Grid dimensions if the steps were re-indexed by a grid enumeration.
    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    /// Attaches grid metadata without touching the steps.
    pub fn with_grid(mut self, grid: Option<(usize, usize)>) -> Self {
        self.grid = grid;
        self
    }

    /// Query count of the final step.
    pub fn query_count(&self) -> usize {
        self.steps.last().map_or(0, AttentionMask::n_query)
    }

    pub fn is_square(&self) -> bool {
        self.query_count() == self.n
    }

    pub fn step_true_counts(&self) -> Vec<usize> {
        self.steps.iter().map(AttentionMask::count_true).collect()
    }

    pub fn total_true(&self) -> usize {
        self.step_true_counts().iter().sum()
    }

    /// Number of `n`-row query blocks in the final step.
    pub fn query_block_count(&self) -> usize {
        self.query_count() / self.n
    }

    /// Square factorization formed by the earlier steps and rows
    /// `block·n .. (block+1)·n` of the final step.
    pub fn query_block(&self, block: usize) -> Result<Self> {
        if block >= self.query_block_count() {
            return invalid(format!(
                "query block {block} out of range ({} blocks)",
                self.query_block_count()
            ));
        }
        let mut steps = self.steps.clone();
        let last = steps.len() - 1;
        steps[last] = steps[last].row_block(block * self.n, self.n)?;
        Ok(Self {
            steps,
            ..self.clone()
        })
    }
}

/// `⌈√n⌉`, the default block size.
pub fn default_stride(n: usize) -> usize {
    let mut s = (n as f64).sqrt() as usize;
    while s * s < n {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= n {
        s -= 1;
    }
    s
}

/// Upper bound `4·n·⌈√n⌉` on the attended positions of a factorization.
pub fn sparsity_budget(n: usize) -> usize {
    4 * n * default_stride(n)
}

fn check_stride(n: usize, stride: usize) -> Result<()> {
    if n == 0 {
        return invalid("token count must be at least 1");
    }
    if stride == 0 || stride > n {
        return invalid(format!("stride {stride} must lie in 1..={n}"));
    }
    Ok(())
}

fn square(n: usize, f: impl Fn(usize, usize) -> bool) -> AttentionMask {
    AttentionMask::from_fn(n, n, f).with_diagonal()
}

/// Causal fixed pattern: a causal block window, then every block's last token.
pub fn make_fixed(n: usize, stride: usize) -> Result<PatternFactorization> {
    check_stride(n, stride)?;
    let s = stride;
    let local = square(n, |a, b| a / s == b / s && b <= a);
    let summary = square(n, |a, b| (b % s == s - 1 && b <= a) || a == b);
    PatternFactorization::new(PatternKind::Fixed, s, vec![local, summary])
}

/// Bidirectional fixed pattern ("left to right").
pub fn make_ltr(n: usize, stride: usize) -> Result<PatternFactorization> {
    check_stride(n, stride)?;
    let s = stride;
    let local = square(n, |a, b| a / s == b / s);
    let summary = square(n, |a, b| b % s == s - 1 || a == b);
    PatternFactorization::new(PatternKind::Ltr, s, vec![local, summary])
}

/// LTR with each step transposed and the step order reversed.
pub fn make_rtl(n: usize, stride: usize) -> Result<PatternFactorization> {
    let ltr = make_ltr(n, stride)?;
    let steps = ltr
        .steps()
        .iter()
        .rev()
        .map(|m| m.transpose().with_diagonal())
        .collect();
    PatternFactorization::new(PatternKind::Rtl, stride, steps)
}

/// Causal strided pattern: a local window, then every `stride`-th earlier token.
pub fn make_strided(n: usize, stride: usize) -> Result<PatternFactorization> {
    check_stride(n, stride)?;
    let s = stride;
    let local = square(n, |a, b| b <= a && a - b < s);
    let periodic = square(n, |a, b| b <= a && (a - b) % s == 0);
    PatternFactorization::new(PatternKind::Strided, s, vec![local, periodic])
}

/// Bidirectional strided pattern with full information.
pub fn make_strided_full(n: usize, stride: usize) -> Result<PatternFactorization> {
    check_stride(n, stride)?;
    let s = stride;
    let local = square(n, |a, b| a.abs_diff(b) < s);
    let periodic = square(n, |a, b| a.abs_diff(b) % s == 0);
    PatternFactorization::new(PatternKind::StridedFull, s, vec![local, periodic])
}

/// Replicates the final step's rows so `query_count` queries read the `n` keys.
///
/// Row `q` of the new final mask equals row `q mod n` of the original.
pub fn expand_nonsquare(
    f: &PatternFactorization,
    query_count: usize,
) -> Result<PatternFactorization> {
    let n = f.n();
    if !f.is_square() {
        return invalid("factorization is already expanded");
    }
    if query_count == 0 || !query_count.is_multiple_of(n) {
        return invalid(format!(
            "query count {query_count} is not a positive multiple of {n}"
        ));
    }
    let mut steps = f.steps().to_vec();
    let last = steps.len() - 1;
    let original = &f.steps()[last];
    steps[last] = AttentionMask::from_fn(query_count, n, |q, k| original.get(q % n, k));
    Ok(PatternFactorization { steps, ..f.clone() })
}

/// Eight head masks: LTR step 1, LTR step 2, RTL step 1, RTL step 2, twice.
pub fn head_assignment(n: usize, stride: usize) -> Result<Vec<(usize, AttentionMask)>> {
    let ltr = make_ltr(n, stride)?;
    let rtl = make_rtl(n, stride)?;
    let base: Vec<&AttentionMask> = ltr.steps().iter().chain(rtl.steps()).collect();
    Ok(base
        .iter()
        .cycle()
        .take(HEAD_COUNT)
        .enumerate()
        .map(|(head, &m)| (head, m.clone()))
        .collect())
}
