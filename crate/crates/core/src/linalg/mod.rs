//! Dense row-major matrices, SVD, norms and the empirical cross-covariance.

mod svd;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::assignment::Assignment;
use crate::error::{Error, Result};

pub use svd::{svd, svd_golub_kahan, svd_jacobi, SvdResult, JACOBI_MAX_COLS};

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Dense `f64` matrix in row-major order.
///
/// Always at least 1×1 and free of NaN/Inf.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds from row slices; all rows must share a length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Matrix::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in diag.iter().enumerate() {
            data[i * n + i] = v;
        }
        Matrix::new(n, n, data)
    }

    /// Builds from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::invalid("ragged columns"));
        }
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        Matrix::new(rows, cols, data)
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix::from_raw(self.cols, self.rows, out)
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let dst = &mut out[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(Matrix::from_raw(self.rows, other.cols, out))
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.cols * other.cols];
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &bv) in out[i * other.cols..(i + 1) * other.cols].iter_mut().zip(b) {
                    *d += a * bv;
                }
            }
        }
        Ok(Matrix::from_raw(self.cols, other.cols, out))
    }

    /// Keeps the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Result<Matrix> {
        if k == 0 || k > self.cols {
            return Err(Error::invalid(format!("cannot take {k} of {} columns", self.cols)));
        }
        let data = self.iter_rows().flat_map(|r| r[..k].iter().copied()).collect();
        Ok(Matrix::from_raw(self.rows, k, data))
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Matrix> {
        if idx.is_empty() {
            return Err(Error::invalid("empty row selection"));
        }
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(Error::invalid(format!("row {i} out of range {}", self.rows)));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Matrix::from_raw(idx.len(), self.cols, data))
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix::from_raw(self.rows, self.cols, self.data.iter().map(|v| v * alpha).collect())
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::invalid("shape mismatch in subtraction"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix::from_raw(self.rows, self.cols, data))
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::invalid("shape mismatch in addition"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix::from_raw(self.rows, self.cols, data))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Subtracts `means[j]` from every entry of column `j`.
    pub fn subtract_row_vector(&self, means: &[f64]) -> Result<Matrix> {
        if means.len() != self.cols {
            return Err(Error::invalid(format!(
                "mean vector has {} entries, matrix has {} columns",
                means.len(),
                self.cols
            )));
        }
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.cols) {
            for (v, m) in row.iter_mut().zip(means) {
                *v -= m;
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Empirical cross-covariance `Σ_i x_i z_{π(i)}ᵀ`, deliberately not divided by `n`.
pub fn cross_covariance(x: &Matrix, z: &Matrix, pi: &Assignment) -> Result<Matrix> {
    if pi.len() != x.rows() {
        return Err(Error::invalid(format!(
            "assignment covers {} inputs, x has {} rows",
            pi.len(),
            x.rows()
        )));
    }
    let (d, dz) = (x.cols(), z.cols());
    let mut out = vec![0.0; d * dz];
    for (i, &j) in pi.as_slice().iter().enumerate() {
        if j >= z.rows() {
            return Err(Error::invalid(format!(
                "assignment maps input {i} to record {j}, only {} records",
                z.rows()
            )));
        }
        let zr = z.row(j);
        for (a, &xv) in x.row(i).iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            for (o, &zv) in out[a * dz..(a + 1) * dz].iter_mut().zip(zr) {
                *o += xv * zv;
            }
        }
    }
    Ok(Matrix::from_raw(d, dz, out))
}

/// Subtracts the column means; returns the centered matrix and the means.
pub fn center_columns(x: &Matrix) -> (Matrix, Vec<f64>) {
    let n = x.rows() as f64;
    let mut means = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let centered = x.subtract_row_vector(&means).expect("means match column count");
    (centered, means)
}

pub fn frobenius_norm(a: &Matrix) -> f64 {
    norm2(a.as_slice())
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> f64 {
    svd(a).map(|s| s.sigma[0]).unwrap_or(0.0)
}

/// Nuclear norm: sum of the singular values.
pub fn singular_value_sum(a: &Matrix) -> f64 {
    svd(a).map(|s| s.sigma.iter().sum()).unwrap_or(0.0)
}

/// Number of singular values above `RANK_TOLERANCE · σ₀`.
pub fn numerical_rank(sigma: &[f64]) -> usize {
    match sigma.first() {
        Some(&top) if top > 0.0 => sigma.iter().filter(|&&s| s > RANK_TOLERANCE * top).count(),
        _ => 0,
    }
}

/// Orthonormal basis of the complement of `span(basis)` in `ℝ^dim`, built by
/// Gram-Schmidt over the standard basis (twice, for stability).
pub(crate) fn orthonormal_complement(basis: &[Vec<f64>], dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut out = Vec::with_capacity(count);
    for e in 0..dim {
        if out.len() == count {
            break;
        }
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        for _ in 0..2 {
            for q in &all {
                let c = dot(&v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nv = norm2(&v);
        if nv > 1e-8 {
            for vi in &mut v {
                *vi /= nv;
            }
            all.push(v.clone());
            out.push(v);
        }
    }
    out
}
