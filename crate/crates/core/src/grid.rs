//! Grid enumerations and the Enumerate-Shift-Apply re-indexing of masks.
//!
//! A one-dimensional pattern written over ranks `0..h·w` is moved onto the
//! row-major token order of an image by looking up each token's rank in a
//! [`GridEnumeration`]. With the Manhattan enumeration, tokens close in the
//! image get close ranks, so block-local patterns become grid-local.

use crate::error::{invalid, Result};
use crate::mask::AttentionMask;
use crate::patterns::PatternFactorization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnumerationKind {
    RowMajor,
    /// Manhattan distance from `(0, 0)`, ties by row then column.
    Manhattan,
}

/// Bijection between the cells of a `height × width` grid and ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridEnumeration {
    kind: EnumerationKind,
    height: usize,
    width: usize,
    // indexed by row-major cell index
    rank_of: Vec<usize>,
    // indexed by rank
    cell_of: Vec<(usize, usize)>,
}

impl GridEnumeration {
    fn from_order(
        kind: EnumerationKind,
        height: usize,
        width: usize,
        cell_of: Vec<(usize, usize)>,
    ) -> Self {
        let mut rank_of = vec![0; height * width];
        for (rank, &(r, c)) in cell_of.iter().enumerate() {
            rank_of[r * width + c] = rank;
        }
        Self {
            kind,
            height,
            width,
            rank_of,
            cell_of,
        }
    }

    pub fn kind(&self) -> EnumerationKind {
        self.kind
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rank_of(&self, row: usize, col: usize) -> usize {
        assert!(row < self.height && col < self.width, "cell out of range");
        self.rank_of[row * self.width + col]
    }

    pub fn cell_of(&self, rank: usize) -> (usize, usize) {
        self.cell_of[rank]
    }

    /// Rank of the token at row-major index `index`.
    pub fn rank_of_index(&self, index: usize) -> usize {
        self.rank_of[index]
    }

    /// Ranks laid out on the grid, row by row.
    pub fn rank_table(&self) -> Vec<Vec<usize>> {
        (0..self.height)
            .map(|r| self.rank_of[r * self.width..(r + 1) * self.width].to_vec())
            .collect()
    }
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return invalid(format!("grid {height}x{width} has a zero dimension"));
    }
    Ok(())
}

/// The standard reshape order: `rank = row·width + col`.
pub fn row_major(height: usize, width: usize) -> Result<GridEnumeration> {
    check_dims(height, width)?;
    let cells = (0..height)
        .flat_map(|r| (0..width).map(move |c| (r, c)))
        .collect();
    Ok(GridEnumeration::from_order(
        EnumerationKind::RowMajor,
        height,
        width,
        cells,
    ))
}

/// Cells ordered by `(row + col, row, col)`.
pub fn esa_enumeration(height: usize, width: usize) -> Result<GridEnumeration> {
    check_dims(height, width)?;
    // walk anti-diagonals; within one, rows ascend and columns follow
    let mut cells = Vec::with_capacity(height * width);
    for d in 0..height + width - 1 {
        let first_row = d.saturating_sub(width - 1);
        let last_row = d.min(height - 1);
        for r in first_row..=last_row {
            cells.push((r, d - r));
        }
    }
    Ok(GridEnumeration::from_order(
        EnumerationKind::Manhattan,
        height,
        width,
        cells,
    ))
}

/// Re-indexes a square rank-space mask onto row-major tokens.
///
/// `out[i, j] = mask[rank(i), rank(j)]` where `rank(i)` is the rank of the
/// cell at row-major index `i`.
pub fn apply_enumeration(mask: &AttentionMask, e: &GridEnumeration) -> Result<AttentionMask> {
    if !mask.is_square() || mask.n_query() != e.len() {
        return invalid(format!(
            "mask {}x{} does not match a {}x{} grid",
            mask.n_query(),
            mask.n_key(),
            e.height(),
            e.width()
        ));
    }
    Ok(AttentionMask::from_fn(e.len(), e.len(), |i, j| {
        mask.get(e.rank_of_index(i), e.rank_of_index(j))
    }))
}

/// Applies the same enumeration to every step of a square factorization.
pub fn apply_esa_to_factorization(
    f: &PatternFactorization,
    e: &GridEnumeration,
) -> Result<PatternFactorization> {
    if !f.is_square() {
        return invalid("grid re-indexing needs square steps; expand after re-indexing");
    }
    let steps = f
        .steps()
        .iter()
        .map(|m| apply_enumeration(m, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(PatternFactorization::new(f.kind(), f.stride(), steps)?
        .with_grid(Some((e.height(), e.width()))))
}
