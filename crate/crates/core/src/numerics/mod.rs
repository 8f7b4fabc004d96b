//! Dense linear-algebra kernels: matrices, vectors, QR, triangular solves,
//! a Jacobi SVD, and Matrix Market I/O.
//!
//! Everything here is plain `f64` with row-major storage. The sizes this
//! crate targets (a few thousand rows, a few hundred columns) do not justify
//! blocked kernels, so the implementations favour clarity and bit-stable
//! determinism over throughput.

mod matrix_market;
mod qr;
mod svd;
mod triangular;

pub use matrix_market::{
    read_matrix_market, read_vector_text, write_matrix_market_array,
    write_matrix_market_coordinate, write_vector_text,
};
pub use qr::{householder_qr, QrFactors};
pub use svd::{
    jacobi_svd, pseudoinverse, singular_values, smallest_singular_value, spectral_norm, Svd,
};
pub use triangular::{invert_upper_triangular, solve_upper_triangular};

use crate::error::{Error, Result};

/// Relative threshold below which a triangular diagonal entry (or a singular
/// value, for the pseudoinverse cutoff) is treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Formats a float with 17 significant digits, enough for an exact
/// `f64` round-trip through text.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

// ── Vector ──────────────────────────────────────────────────────────────

/// A dense column vector of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn zeros(len: usize) -> Self {
        Vector {
            data: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Euclidean norm.
    pub fn norm2(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

/// Dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm of a slice.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance between two equal-length slices.
pub fn distance2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

// ── DenseMatrix ─────────────────────────────────────────────────────────

/// A dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from nested rows. Errors on ragged input or
    /// non-finite entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        let m = DenseMatrix {
            rows: nrows,
            cols: ncols,
            data,
        };
        if !m.is_finite() {
            return Err(Error::NonFinite("matrix constructed from rows".into()));
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a contiguous slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Matrix-vector product `A·x`.
    ///
    /// Errors with [`Error::DimensionMismatch`] when `x.len() != cols` and
    /// with [`Error::NonFinite`] when `x` carries NaN or infinities.
    pub fn matvec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matvec: matrix is {}x{}, vector has length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matvec operand".into()));
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            out.push(dot(self.row(i), x));
        }
        Ok(Vector::new(out))
    }

    /// Matrix product `A·B`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        // Accumulate row-by-row over k so both operands stream forward.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                let orow = out.row_mut(i);
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Squared Euclidean norm of each row.
    pub fn row_sq_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), self.row(i))).collect()
    }

    /// Gathers the listed rows into a new matrix, preserving order.
    pub fn gather_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(indices.len(), self.cols);
        for (k, &i) in indices.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }
}
