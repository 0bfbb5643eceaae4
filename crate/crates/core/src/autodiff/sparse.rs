//! Fixed linear maps applied column-wise to `[points, channels]` blocks.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// A fixed linear operator `A: R^{n_in} -> R^{n_out}` acting independently on
/// each of `width` interleaved channels.
pub trait LinearMap: Send + Sync + Debug {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    /// `y = A x`, with `x: [input_len, width]` and `y: [output_len, width]`.
    fn apply(&self, x: &[f64], width: usize, y: &mut [f64]);
    /// `x = Aᵀ y`.
    fn apply_adjoint(&self, y: &[f64], width: usize, x: &mut [f64]);
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            per_row[r].push((c, v));
        }
        Ok(Self::from_rows(cols, per_row))
    }

    pub(crate) fn from_rows(cols: usize, per_row: Vec<Vec<(usize, f64)>>) -> Self {
        let rows = per_row.len();
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in per_row {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Row-selection matrix picking `rows` (in order) out of `n` points.
    pub fn selection(n: usize, rows: &[usize]) -> Result<Self> {
        let triplets: Vec<_> = rows.iter().enumerate().map(|(r, &c)| (r, c, 1.0)).collect();
        Self::from_triplets(rows.len(), n, &triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Matrix-vector product for a single channel.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.apply(x, 1, &mut y);
        y
    }

    /// `self · other`.
    pub fn compose(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.cols != other.rows {
            return Err(Error::shape("compose", &[self.cols], &[other.rows]));
        }
        let per_row = (0..self.rows)
            .map(|r| {
                let mut acc = Vec::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        acc.push((c, a * b));
                    }
                }
                acc
            })
            .collect();
        Ok(Self::from_rows(other.cols, per_row))
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<SparseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                "linear_combination",
                &[self.rows, self.cols],
                &[other.rows, other.cols],
            ));
        }
        let per_row = (0..self.rows)
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| (c, a * v))
                    .chain(other.row(r).map(|(c, v)| (c, b * v)))
                    .collect()
            })
            .collect();
        Ok(Self::from_rows(self.cols, per_row))
    }

    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let per_row = rows.iter().map(|&r| self.row(r).collect()).collect();
        Self::from_rows(self.cols, per_row)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                per_row[c].push((r, v));
            }
        }
        Self::from_rows(self.rows, per_row)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[r * self.cols + c] += v;
            }
        }
        out
    }
}

impl LinearMap for SparseMatrix {
    fn input_len(&self) -> usize {
        self.cols
    }

    fn output_len(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64], width: usize, y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols * width);
        debug_assert_eq!(y.len(), self.rows * width);
        if width == 1 {
            for (r, out) in y.iter_mut().enumerate() {
                let span = self.indptr[r]..self.indptr[r + 1];
                *out = self.indices[span.clone()]
                    .iter()
                    .zip(&self.values[span])
                    .map(|(&c, &v)| v * x[c])
                    .sum();
            }
            return;
        }
        y.fill(0.0);
        for r in 0..self.rows {
            let out = &mut y[r * width..(r + 1) * width];
            for (c, v) in self.row(r) {
                let src = &x[c * width..(c + 1) * width];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
    }

    fn apply_adjoint(&self, y: &[f64], width: usize, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols * width);
        debug_assert_eq!(y.len(), self.rows * width);
        x.fill(0.0);
        for r in 0..self.rows {
            let src = &y[r * width..(r + 1) * width];
            for (c, v) in self.row(r) {
                let dst = &mut x[c * width..(c + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            4,
            &[(0, 0, 1.0), (0, 3, -2.0), (1, 1, 0.5), (2, 2, 3.0), (2, 0, 1.0), (2, 0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.to_dense()[2 * 4], 2.0);
    }

    #[test]
    fn adjoint_matches_transpose() {
        let a = sample();
        let y = [1.0, -1.0, 2.0, 0.5, 0.25, -3.0];
        let mut x = vec![0.0; 8];
        a.apply_adjoint(&y, 2, &mut x);
        let at = a.transpose();
        let mut x2 = vec![0.0; 8];
        at.apply(&y, 2, &mut x2);
        assert_eq!(x, x2);
    }

    #[test]
    fn compose_matches_dense_product() {
        let a = sample();
        let b = a.transpose();
        let ab = a.compose(&b).unwrap().to_dense();
        let (da, db) = (a.to_dense(), b.to_dense());
        for i in 0..3 {
            for j in 0..3 {
                let expect: f64 = (0..4).map(|k| da[i * 4 + k] * db[k * 3 + j]).sum();
                assert!((ab[i * 3 + j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_triplet() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }
}
