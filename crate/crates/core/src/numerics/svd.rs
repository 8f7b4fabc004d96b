//! Singular value decomposition by one-sided Jacobi rotations, plus the
//! norm and pseudoinverse helpers built on it.
//!
//! One-sided Jacobi orthogonalizes the columns of the working matrix by
//! plane rotations; at convergence the column norms are the singular values.
//! It is slower than bidiagonalization-based methods but has excellent
//! relative accuracy and is simple enough to verify line by line. Tall
//! matrices are reduced with a QR pass first, so the sweep cost is O(n^3)
//! per sweep regardless of row count.

use super::{householder_qr, DenseMatrix, RANK_TOL};
use crate::error::{Error, Result};

/// Maximum number of Jacobi sweeps before giving up; convergence is
/// quadratic once rotations become small, so this is never reached for
/// matrices this crate produces.
const MAX_SWEEPS: usize = 64;

/// Off-diagonal tolerance, relative to the geometric mean of the column
/// norms of the rotated pair.
const ORTHO_TOL: f64 = 1e-15;

/// SVD factors `A = U diag(sigma) V^T` with `sigma` sorted descending,
/// `u` of shape `m x n` and `v` of shape `n x n` (thin form, `m >= n`).
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

/// One-sided Jacobi SVD of a tall or square matrix (`rows >= cols`).
pub fn jacobi_svd(a: &DenseMatrix) -> Result<Svd> {
    let m = a.rows();
    let n = a.cols();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "jacobi_svd requires rows >= cols, got {m}x{n}"
        )));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("jacobi_svd on an empty matrix".into()));
    }

    // Work on columns: w[j] is column j of the evolving matrix.
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j)).collect())
        .collect();
    let mut v = DenseMatrix::identity(n);

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (app, aqq, apq) = {
                    let (wp, wq) = (&w[p], &w[q]);
                    let mut app = 0.0;
                    let mut aqq = 0.0;
                    let mut apq = 0.0;
                    for i in 0..m {
                        app += wp[i] * wp[i];
                        aqq += wq[i] * wq[i];
                        apq += wp[i] * wq[i];
                    }
                    (app, aqq, apq)
                };
                if app == 0.0 || aqq == 0.0 {
                    continue; // an exactly-zero column never needs rotating
                }
                if apq.abs() <= ORTHO_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;

                // Rotation angle that annihilates the (p,q) Gram entry.
                let zeta = (aqq - app) / (2.0 * apq);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                let (lo, hi) = w.split_at_mut(q);
                let wp = &mut lo[p];
                let wq = &mut hi[0];
                for i in 0..m {
                    let xp = wp[i];
                    let xq = wq[i];
                    wp[i] = c * xp - s * xq;
                    wq[i] = s * xp + c * xq;
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; sort descending.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = w
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = DenseMatrix::zeros(m, n);
    let mut v_sorted = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        if s > 0.0 {
            for i in 0..m {
                u.set(i, dst, w[src][i] / s);
            }
        }
        for i in 0..n {
            v_sorted.set(i, dst, v.get(i, src));
        }
    }

    Ok(Svd {
        u,
        sigma,
        v: v_sorted,
    })
}

/// All singular values of `a`, sorted descending. Works for any shape; wide
/// matrices are transposed (same values) and tall ones are compressed with a
/// QR pass so the Jacobi sweeps run on a square factor.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    let work;
    let t = if a.rows() < a.cols() {
        work = a.transpose();
        &work
    } else {
        a
    };
    if t.rows() > t.cols() {
        let f = householder_qr(t)?;
        Ok(jacobi_svd(&f.r)?.sigma)
    } else {
        Ok(jacobi_svd(t)?.sigma)
    }
}

/// Largest singular value (operator 2-norm).
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(a)?[0])
}

/// Smallest singular value of a tall or square matrix.
pub fn smallest_singular_value(a: &DenseMatrix) -> Result<f64> {
    if a.rows() < a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "smallest_singular_value requires rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let sv = singular_values(a)?;
    Ok(sv[sv.len() - 1])
}

/// Moore-Penrose pseudoinverse of a square matrix via the Jacobi SVD.
/// Singular values below `RANK_TOL * sigma_max` are truncated to zero.
pub fn pseudoinverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.rows();
    if n != m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "pseudoinverse expects a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let svd = jacobi_svd(m)?;
    let cutoff = RANK_TOL * svd.sigma[0];
    // M^+ = V diag(1/sigma) U^T, truncating tiny singular values.
    let mut out = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let s = svd.sigma[k];
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..n {
            let vik = svd.v.get(i, k) * inv;
            if vik == 0.0 {
                continue;
            }
            for j in 0..n {
                let cur = out.get(i, j);
                out.set(i, j, cur + vik * svd.u.get(j, k));
            }
        }
    }
    Ok(out)
}
