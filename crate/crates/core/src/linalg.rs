//! Small dense and sparse linear-algebra kernels.
//!
//! Everything here is row-major `f64`. The solvers only need matrix-vector
//! products, Frobenius inner products and (for instance generation and
//! reporting) singular values of moderate dense matrices.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat::from_vec: bad length");
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// `weight * u v^T`
    pub fn outer(weight: f64, u: &[f64], v: &[f64]) -> Self {
        Mat::from_fn(u.len(), v.len(), |i, j| weight * u[i] * v[j])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self * x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T * x`
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            if *xi != 0.0 {
                axpy(*xi, self.row(i), &mut out);
            }
        }
        out
    }

    /// Frobenius inner product.
    pub fn frob_dot(&self, other: &Mat) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        dot(&self.data, &other.data)
    }

    pub fn frob_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.data)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &Mat) {
        axpy(alpha, &other.data, &mut self.data);
    }

    /// Singular values in non-ascending order (one-sided Jacobi).
    pub fn singular_values(&self) -> Vec<f64> {
        // Work on the orientation with fewer columns.
        let a = if self.cols > self.rows {
            self.transpose()
        } else {
            self.clone()
        };
        let (m, n) = (a.rows, a.cols);
        // Column-major copy for cheap column rotations.
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
        for _sweep in 0..60 {
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    let alpha = dot(&cols[p], &cols[p]);
                    let beta = dot(&cols[q], &cols[q]);
                    let gamma = dot(&cols[p], &cols[q]);
                    if gamma == 0.0 {
                        continue;
                    }
                    let rel = gamma.abs() / (alpha * beta).sqrt();
                    off = off.max(rel);
                    if rel < 1e-15 {
                        continue;
                    }
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    let (left, right) = cols.split_at_mut(q);
                    let (cp, cq) = (&mut left[p], &mut right[0]);
                    for i in 0..m {
                        let x = cp[i];
                        let y = cq[i];
                        cp[i] = c * x - s * y;
                        cq[i] = s * x + c * y;
                    }
                }
            }
            if off < 1e-15 {
                break;
            }
        }
        let mut sv: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
        sv
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.singular_values().iter().sum()
    }
}

/// Sparse matrix in coordinate form with sorted, de-duplicated entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMat {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col, value)` triples sorted by `(row, col)`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMat {
    pub fn new(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            debug_assert!(i < rows && j < cols);
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        SparseMat {
            rows,
            cols,
            entries: merged,
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            out[i] += v * x[j];
        }
        out
    }

    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for &(i, j, v) in &self.entries {
            out[j] += v * x[i];
        }
        out
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m.data[i * self.cols + j] += v;
        }
        m
    }
}

/// A linear form on the primal space: the matrix `Ay + a` handed to LO oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LinearForm {
    Dense(Mat),
    Sparse(SparseMat),
}

impl LinearForm {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            LinearForm::Dense(m) => (m.rows, m.cols),
            LinearForm::Sparse(s) => (s.rows, s.cols),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LinearForm::Dense(m) => m.matvec(x),
            LinearForm::Sparse(s) => s.matvec(x),
        }
    }

    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LinearForm::Dense(m) => m.t_matvec(x),
            LinearForm::Sparse(s) => s.t_matvec(x),
        }
    }

    /// `u^T self v`
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            LinearForm::Dense(m) => dot(u, &m.matvec(v)),
            LinearForm::Sparse(s) => s.entries.iter().map(|&(i, j, x)| u[i] * x * v[j]).sum(),
        }
    }

    pub fn to_dense(&self) -> Mat {
        match self {
            LinearForm::Dense(m) => m.clone(),
            LinearForm::Sparse(s) => s.to_dense(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            LinearForm::Dense(m) => m.max_abs(),
            LinearForm::Sparse(s) => s.entries.iter().fold(0.0, |a, e| a.max(e.2.abs())),
        }
    }

    pub fn frob_norm(&self) -> f64 {
        match self {
            LinearForm::Dense(m) => m.frob_norm(),
            LinearForm::Sparse(s) => s.entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt(),
        }
    }

    /// Largest absolute row sum; bounds every eigenvalue in magnitude.
    pub fn max_abs_row_sum(&self) -> f64 {
        match self {
            LinearForm::Dense(m) => (0..m.rows).map(|i| norm1(m.row(i))).fold(0.0, f64::max),
            LinearForm::Sparse(s) => {
                let mut sums = vec![0.0; s.rows];
                for &(i, _, v) in &s.entries {
                    sums[i] += v.abs();
                }
                sums.into_iter().fold(0.0, f64::max)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LinearForm::Dense(m) => m.data.iter().all(|x| *x == 0.0),
            LinearForm::Sparse(s) => s.entries.iter().all(|e| e.2 == 0.0),
        }
    }

    /// Frobenius inner product with a dense matrix.
    pub fn frob_dot(&self, other: &Mat) -> f64 {
        match self {
            LinearForm::Dense(m) => m.frob_dot(other),
            LinearForm::Sparse(s) => s.entries.iter().map(|&(i, j, v)| v * other.get(i, j)).sum(),
        }
    }
}
