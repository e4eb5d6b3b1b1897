//! Boolean attention masks.

use std::fmt;

use crate::error::{invalid, Result};

/// Dense boolean `n_query × n_key` mask; `true` marks an attended position.
///
/// The type itself does not enforce that rows are non-empty so that
/// malformed masks can be represented and rejected downstream; see
/// [`AttentionMask::validate`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AttentionMask {
    n_query: usize,
    n_key: usize,
    bits: Vec<bool>,
}

impl AttentionMask {
    pub fn from_fn(n_query: usize, n_key: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(n_query * n_key);
        for q in 0..n_query {
            for k in 0..n_key {
                bits.push(f(q, k));
            }
        }
        Self {
            n_query,
            n_key,
            bits,
        }
    }

    pub fn from_bits(n_query: usize, n_key: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != n_query * n_key {
            return invalid(format!(
                "mask has {} bits, expected {n_query}x{n_key}",
                bits.len()
            ));
        }
        Ok(Self {
            n_query,
            n_key,
            bits,
        })
    }

    /// Every query attends every key.
    pub fn dense(n_query: usize, n_key: usize) -> Self {
        Self::from_fn(n_query, n_key, |_, _| true)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |q, k| q == k)
    }

    pub fn n_query(&self) -> usize {
        self.n_query
    }

    pub fn n_key(&self) -> usize {
        self.n_key
    }

    pub fn is_square(&self) -> bool {
        self.n_query == self.n_key
    }

    pub fn get(&self, q: usize, k: usize) -> bool {
        assert!(
            q < self.n_query && k < self.n_key,
            "mask index out of range"
        );
        self.bits[q * self.n_key + k]
    }

    pub fn set(&mut self, q: usize, k: usize, value: bool) {
        assert!(
            q < self.n_query && k < self.n_key,
            "mask index out of range"
        );
        self.bits[q * self.n_key + k] = value;
    }

    pub fn row(&self, q: usize) -> &[bool] {
        &self.bits[q * self.n_key..(q + 1) * self.n_key]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of attended positions.
    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn row_counts(&self) -> Vec<usize> {
        (0..self.n_query)
            .map(|q| self.row(q).iter().filter(|&&b| b).count())
            .collect()
    }

    /// Attended key indices of query row `q`, ascending.
    pub fn attended(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(q)
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n_key, self.n_query, |q, k| self.get(k, q))
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.n_query != other.n_query || self.n_key != other.n_key {
            return invalid("mask shapes differ in union");
        }
        Ok(Self {
            n_query: self.n_query,
            n_key: self.n_key,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a || b)
                .collect(),
        })
    }

    /// Forces the diagonal of a square mask to `true`.
    pub(crate) fn with_diagonal(mut self) -> Self {
        for i in 0..self.n_query.min(self.n_key) {
            self.set(i, i, true);
        }
        self
    }

    /// Rows `start..start + len` as a new mask.
    pub fn row_block(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.n_query {
            return invalid(format!(
                "row block {start}..{} exceeds {} rows",
                start + len,
                self.n_query
            ));
        }
        Ok(Self {
            n_query: len,
            n_key: self.n_key,
            bits: self.bits[start * self.n_key..(start + len) * self.n_key].to_vec(),
        })
    }

    /// First row with no attended key.
    pub fn first_empty_row(&self) -> Option<usize> {
        (0..self.n_query).find(|&q| !self.row(q).iter().any(|&b| b))
    }

    /// Checks non-empty rows and, for square masks, a fully attended diagonal.
    pub fn validate(&self) -> Result<()> {
        if self.n_query == 0 || self.n_key == 0 {
            return invalid("mask has a zero dimension");
        }
        if let Some(q) = self.first_empty_row() {
            return invalid(format!("mask row {q} attends nothing"));
        }
        if self.is_square() {
            if let Some(i) = (0..self.n_query).find(|&i| !self.get(i, i)) {
                return invalid(format!("diagonal entry {i} of square mask is false"));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for AttentionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "AttentionMask {}x{}", self.n_query, self.n_key)?;
        for q in 0..self.n_query {
            let line: String = self
                .row(q)
                .iter()
                .map(|&b| if b { '1' } else { '0' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}
