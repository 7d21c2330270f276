//! Row-major numeric matrix with an explicit per-cell observation mask.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Feature matrix where every cell is either observed or missing.
///
/// Missing cells hold `NaN` in `values`, but the mask is authoritative: an
/// observed cell may legitimately contain any finite value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl SparseMatrix {
    /// Fully observed matrix from row-major values.
    pub fn from_dense(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::Input(format!(
                "expected {} values for a {n_rows}x{n_cols} matrix, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        let observed = vec![true; values.len()];
        Ok(Self {
            n_rows,
            n_cols,
            values,
            observed,
        })
    }

    /// Fully observed matrix from feature columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::Input("columns have different lengths".into()));
        }
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for r in 0..n_rows {
            for c in columns {
                values.push(c[r]);
            }
        }
        Self::from_dense(n_rows, n_cols, values)
    }

    /// Matrix from rows of optional cells (`None` = missing).
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::empty(n_rows, n_cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Input(format!(
                    "row {r} has {} cells, expected {n_cols}",
                    row.len()
                )));
            }
            for (c, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    m.set(r, c, *v);
                }
            }
        }
        Ok(m)
    }

    /// All-missing matrix.
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![f64::NAN; n_rows * n_cols],
            observed: vec![false; n_rows * n_cols],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        row * self.n_cols + col
    }

    /// The cell value, or `None` when missing.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.idx(row, col);
        self.observed[i].then(|| self.values[i])
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[self.idx(row, col)]
    }

    /// Marks the cell observed with value `v`.
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let i = self.idx(row, col);
        self.values[i] = v;
        self.observed[i] = true;
    }

    pub fn set_missing(&mut self, row: usize, col: usize) {
        let i = self.idx(row, col);
        self.values[i] = f64::NAN;
        self.observed[i] = false;
    }

    /// Row as optional cells.
    pub fn row(&self, row: usize) -> Vec<Option<f64>> {
        (0..self.n_cols).map(|c| self.get(row, c)).collect()
    }

    /// Raw row slice; missing cells read as `NaN`.
    pub fn row_values(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn row_mask(&self, row: usize) -> &[bool] {
        &self.observed[row * self.n_cols..(row + 1) * self.n_cols]
    }

    /// Dense row when every cell is observed.
    pub fn dense_row(&self, row: usize) -> Option<&[f64]> {
        self.row_mask(row)
            .iter()
            .all(|&o| o)
            .then(|| self.row_values(row))
    }

    /// Column as optional cells.
    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    /// Observed values of a column in row order.
    pub fn observed_column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).filter_map(|r| self.get(r, col)).collect()
    }

    /// Number of missing cells in a column.
    pub fn missing_in_column(&self, col: usize) -> usize {
        (0..self.n_rows)
            .filter(|&r| !self.is_observed(r, col))
            .count()
    }

    pub fn missing_count(&self) -> usize {
        self.observed.iter().filter(|&&o| !o).count()
    }

    /// Fraction of missing cells in a column; 0 for an empty matrix.
    pub fn sparsity(&self, col: usize) -> f64 {
        if self.n_rows == 0 {
            return 0.0;
        }
        self.missing_in_column(col) as f64 / self.n_rows as f64
    }

    /// Indices of rows with no missing cell.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n_rows)
            .filter(|&r| self.row_mask(r).iter().all(|&o| o))
            .collect()
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        let mut observed = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row_values(r));
            observed.extend_from_slice(self.row_mask(r));
        }
        Self {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
            observed,
        }
    }

    /// Snapshot of the observation mask.
    pub fn mask(&self) -> MissingMask {
        MissingMask {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            observed: self.observed.clone(),
        }
    }
}

/// Per-cell indicator with 1 = observed, 0 = missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingMask {
    n_rows: usize,
    n_cols: usize,
    observed: Vec<bool>,
}

impl MissingMask {
    pub fn new(n_rows: usize, n_cols: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != n_rows * n_cols {
            return Err(Error::Input("mask length does not match shape".into()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            observed,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[row * self.n_cols + col]
    }

    /// Indicator sequence `m_j` for one column in row order.
    pub fn column(&self, col: usize) -> Vec<bool> {
        (0..self.n_rows).map(|r| self.is_observed(r, col)).collect()
    }

    /// Fraction of zeros (missing cells) in a column.
    pub fn sparsity(&self, col: usize) -> f64 {
        if self.n_rows == 0 {
            return 0.0;
        }
        let missing = (0..self.n_rows)
            .filter(|&r| !self.is_observed(r, col))
            .count();
        missing as f64 / self.n_rows as f64
    }

    /// Number of cells with indicator 0.
    pub fn missing_count(&self) -> usize {
        self.observed.iter().filter(|&&o| !o).count()
    }

    /// Cells that are missing here but observed in `base`.
    pub fn newly_missing(&self, base: &MissingMask) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.n_rows {
            for c in 0..self.n_cols {
                if !self.is_observed(r, c) && base.is_observed(r, c) {
                    out.push((r, c));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_columns_agree() {
        let m = SparseMatrix::from_rows(&[
            vec![Some(1.0), None],
            vec![Some(3.0), Some(4.0)],
        ])
        .unwrap();
        assert_eq!(m.column(1), vec![None, Some(4.0)]);
        assert_eq!(m.observed_column(0), vec![1.0, 3.0]);
        assert_eq!(m.complete_rows(), vec![1]);
        assert_eq!(m.sparsity(1), 0.5);
        assert_eq!(m.mask().sparsity(1), 0.5);
        assert!(m.dense_row(0).is_none());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(SparseMatrix::from_rows(&[vec![Some(1.0)], vec![]]).is_err());
        assert!(SparseMatrix::from_dense(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn columns_transpose_into_rows() {
        let m = SparseMatrix::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row_values(1), &[2.0, 4.0]);
    }
}
