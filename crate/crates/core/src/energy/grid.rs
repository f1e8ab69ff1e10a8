use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Axis-aligned box split into a regular lattice of cells.
///
/// Cells are numbered row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
    widths: Vec<f64>,
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || upper.len() != d || cells.len() != d {
            return Err(invalid(
                "grid bounds and cell counts must share one nonzero dimension",
            ));
        }
        for j in 0..d {
            if !(lower[j].is_finite() && upper[j].is_finite() && lower[j] < upper[j]) {
                return Err(invalid(
                    "grid box must have finite lower < upper on every axis",
                ));
            }
            if cells[j] == 0 {
                return Err(invalid("grid needs at least one cell per axis"));
            }
        }
        let widths = (0..d)
            .map(|j| (upper[j] - lower[j]) / cells[j] as f64)
            .collect();
        Ok(Self {
            lower,
            upper,
            cells,
            widths,
        })
    }

    /// Grid with `longest` cells along the longest axis and roughly square cells.
    pub fn with_longest_axis(lower: Vec<f64>, upper: Vec<f64>, longest: usize) -> Result<Self> {
        let extent_max = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| u - l)
            .fold(0.0, f64::max);
        if !(extent_max > 0.0) {
            return Err(invalid("grid box has zero extent"));
        }
        let cells = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| {
                let c = libm::round(longest as f64 * (u - l) / extent_max) as usize;
                c.max(1)
            })
            .collect();
        Self::new(lower, upper, cells)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Largest cell side length.
    pub fn max_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    /// Length of a cell diagonal.
    pub fn cell_diagonal(&self) -> f64 {
        crate::geometry::norm(&self.widths)
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Per-axis cell coordinates of `x`; points on the upper face map to the last cell.
    pub fn locate(&self, x: &[f64]) -> Option<Vec<usize>> {
        if !self.contains(x) {
            return None;
        }
        Some(
            (0..self.dim())
                .map(|j| {
                    let k = libm::floor((x[j] - self.lower[j]) / self.widths[j]) as usize;
                    k.min(self.cells[j] - 1)
                })
                .collect(),
        )
    }

    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.locate(x).map(|c| self.ravel(&c))
    }

    pub fn ravel(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.cells)
            .fold(0, |acc, (c, n)| acc * n + c)
    }

    pub fn unravel(&self, mut index: usize) -> Vec<usize> {
        let mut out = alloc::vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            out[j] = index % self.cells[j];
            index /= self.cells[j];
        }
        out
    }

    pub fn center_of(&self, coords: &[usize]) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.lower[j] + (coords[j] as f64 + 0.5) * self.widths[j])
            .collect()
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        self.center_of(&self.unravel(index))
    }

    /// All cell centers in index order.
    pub fn centers(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.center(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec;

    #[test]
    fn ravel_roundtrip_and_centers() {
        let g = Grid::new(vec![0.0, 0.0], vec![4.0, 2.0], vec![4, 2]).unwrap();
        assert_eq!(g.len(), 8);
        for i in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(i)), i);
        }
        assert_eq!(g.center(0), vec![0.5, 0.5]);
        assert_eq!(g.index_of(&[3.9, 1.9]), Some(7));
        assert_eq!(g.index_of(&[4.0, 2.0]), Some(7));
        assert_eq!(g.index_of(&[4.1, 0.0]), None);
    }

    #[test]
    fn longest_axis_sizing() {
        let g = Grid::with_longest_axis(vec![0.0, 0.0], vec![10.0, 5.0], 200).unwrap();
        assert_eq!(g.cells(), &[200, 100]);
        assert!(Grid::new(vec![0.0], vec![0.0], vec![3]).is_err());
    }
}
