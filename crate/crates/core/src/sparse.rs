//! Compressed-sparse-row matrices.
//!
//! Every finite element operator on one mesh level shares the node adjacency
//! pattern, so assembly starts from [`CsrMatrix::zeros_with_pattern`] and
//! scatters element contributions into the existing slots.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{DchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in input order, so the result is deterministic.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            per_row[i].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in per_row {
            // stable sort keeps the summation order of duplicates
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut acc = 0.0;
                while k < row.len() && row[k].0 == j {
                    acc += row[k].1;
                    k += 1;
                }
                col_indices.push(j);
                values.push(acc);
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Square matrix with the given structure and all stored values zero.
    ///
    /// `rows[i]` lists the column indices of row `i`; they are sorted and
    /// deduplicated here.
    pub fn zeros_with_pattern(ncols: usize, rows: &[Vec<usize>]) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in rows {
            let mut cols = row.clone();
            cols.sort_unstable();
            cols.dedup();
            col_indices.extend_from_slice(&cols);
            row_offsets.push(col_indices.len());
        }
        let nnz = col_indices.len();
        Self {
            nrows: rows.len(),
            ncols,
            row_offsets,
            col_indices,
            values: vec![0.0; nnz],
        }
    }

    /// Same structure as `self`, every value zero.
    pub fn zeroed(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    /// Position of entry `(i, j)` in the value array, if it is stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_offsets[i];
        let cols = &self.col_indices[start..self.row_offsets[i + 1]];
        cols.binary_search(&j).ok().map(|k| start + k)
    }

    /// Value at `(i, j)`; zero when the entry is not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to a stored entry. Panics if `(i, j)` is outside the pattern.
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is not in the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// `y = self * x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    /// `y += alpha * self * x`.
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let dot: f64 = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
            *yi += alpha * dot;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// Checked variant of [`Self::mul_vec`].
    pub fn try_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(DchError::LengthMismatch {
                expected: self.ncols,
                actual: x.len(),
            });
        }
        Ok(self.mul_vec(x))
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                x[i] * cols.iter().zip(vals).map(|(&j, &a)| a * y[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let k = next[j];
                col_indices[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows);
        let mut triplets = Vec::new();
        let mut acc = vec![0.0; rhs.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; rhs.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (rcols, rvals) = rhs.row(k);
                for (&j, &b) in rcols.iter().zip(rvals) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                triplets.push((i, j, acc[j]));
                acc[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, rhs.ncols, &triplets)
    }

    /// `self + alpha * other`, over the union of both patterns.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            triplets.extend(c.iter().zip(v).map(|(&j, &a)| (i, j, a)));
            let (c, v) = other.row(i);
            triplets.extend(c.iter().zip(v).map(|(&j, &a)| (i, j, alpha * a)));
        }
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Largest absolute entry of `self - other`, comparing over both patterns.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.add_scaled(-1.0, other)
            .values
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.max_abs_diff(&self.transpose()) / scale
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    /// Row sums `A · 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        dense
    }
}

/// Conjugate gradients for a symmetric positive definite `a`, starting from
/// `x`. Stops when `‖b - a x‖₂ ≤ tol · ‖b‖₂`; returns the iteration count.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> usize {
    let n = b.len();
    let mut r = b.to_vec();
    a.mul_vec_add(-1.0, x, &mut r);
    let mut d = r.clone();
    let mut ad = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let target = tol * tol * b.iter().map(|v| v * v).sum::<f64>();
    for it in 0..max_iter {
        if rr <= target {
            return it;
        }
        a.mul_vec_into(&d, &mut ad);
        let alpha = rr / d.iter().zip(&ad).map(|(p, q)| p * q).sum::<f64>();
        for k in 0..n {
            x[k] += alpha * d[k];
            r[k] -= alpha * ad[k];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            d[k] = r[k] + beta * d[k];
        }
    }
    max_iter
}
