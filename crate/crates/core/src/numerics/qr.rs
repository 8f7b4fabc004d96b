//! Thin Householder QR factorization.

use super::{DenseMatrix, Vector};
use crate::error::{Error, Result};

/// Thin QR factors of an `m x n` matrix with `m >= n`: `q` is `m x n` with
/// orthonormal columns, `r` is `n x n` upper triangular with a non-negative
/// diagonal. The diagonal sign convention makes the factorization unique for
/// full-rank input, which the full-sketch/exact-preconditioner equivalence
/// check relies on.
#[derive(Clone, Debug)]
pub struct QrFactors {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

/// Householder QR of a tall matrix (`rows >= cols`).
///
/// Columns that are already (numerically) zero below the diagonal produce a
/// zero Householder vector and are passed through, so rank-deficient input
/// still factors; the deficiency shows up as small diagonal entries of `r`.
pub fn householder_qr(a: &DenseMatrix) -> Result<QrFactors> {
    let m = a.rows();
    let n = a.cols();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "householder_qr requires rows >= cols, got {m}x{n}"
        )));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch(
            "householder_qr on an empty matrix".into(),
        ));
    }

    // Working copy; reflectors are stored separately for the Q accumulation
    // pass (v[k] covers rows k..m, beta[k] = 2 / ||v||^2).
    let mut w = a.clone();
    let mut vs: Vec<Vector> = Vec::with_capacity(n);
    let mut betas = vec![0.0_f64; n];

    for k in 0..n {
        let mut tail_sq = 0.0;
        for i in k + 1..m {
            let v = w.get(i, k);
            tail_sq += v * v;
        }
        let x0 = w.get(k, k);
        let norm = (x0 * x0 + tail_sq).sqrt();

        if norm == 0.0 {
            vs.push(Vector::zeros(m - k));
            continue;
        }

        // alpha = -sign(x0) * ||x|| avoids cancellation in v0 = x0 - alpha.
        let alpha = if x0 > 0.0 { -norm } else { norm };
        let v0 = x0 - alpha;
        let mut v = Vec::with_capacity(m - k);
        v.push(v0);
        for i in k + 1..m {
            v.push(w.get(i, k));
        }
        let v_sq = v.iter().map(|t| t * t).sum::<f64>();
        if v_sq == 0.0 {
            vs.push(Vector::zeros(m - k));
            continue;
        }
        let beta = 2.0 / v_sq;
        betas[k] = beta;

        // Apply H = I - beta v v^T to the trailing columns.
        for j in k..n {
            let mut s = 0.0;
            for (off, vi) in v.iter().enumerate() {
                s += vi * w.get(k + off, j);
            }
            s *= beta;
            for (off, vi) in v.iter().enumerate() {
                let cur = w.get(k + off, j);
                w.set(k + off, j, cur - s * vi);
            }
        }
        // The pivot column is now alpha on the diagonal and zero below, up to
        // rounding; write the exact values.
        w.set(k, k, alpha);
        for i in k + 1..m {
            w.set(i, k, 0.0);
        }
        vs.push(Vector::new(v));
    }

    // Extract R (upper n x n); entries below the diagonal are exactly zero.
    let mut r = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r.set(i, j, w.get(i, j));
        }
    }

    // Accumulate the thin Q by applying the reflectors to I_{m x n} in
    // reverse order.
    let mut q = DenseMatrix::zeros(m, n);
    for j in 0..n {
        q.set(j, j, 1.0);
    }
    for k in (0..n).rev() {
        let beta = betas[k];
        if beta == 0.0 {
            continue;
        }
        let v = &vs[k];
        for j in 0..n {
            let mut s = 0.0;
            for (off, vi) in v.iter().enumerate() {
                s += vi * q.get(k + off, j);
            }
            s *= beta;
            for (off, vi) in v.iter().enumerate() {
                let cur = q.get(k + off, j);
                q.set(k + off, j, cur - s * vi);
            }
        }
    }

    // Normalize signs so every diagonal of R is >= 0.
    for i in 0..n {
        if r.get(i, i) < 0.0 {
            for j in i..n {
                r.set(i, j, -r.get(i, j));
            }
            for row in 0..m {
                q.set(row, i, -q.get(row, i));
            }
        }
    }

    Ok(QrFactors { q, r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngStream;

    fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// 3x2 case worked out by hand: the first column has norm 10, and the
    /// Gram-Schmidt complement of the second column has norm 2.5.
    #[test]
    fn hand_computed_3x2_factors() {
        let a = DenseMatrix::from_rows(vec![
            vec![6.0, 5.0],
            vec![8.0, 10.0],
            vec![0.0, 1.5],
        ])
        .unwrap();
        let f = householder_qr(&a).unwrap();
        let q_expect = DenseMatrix::from_rows(vec![
            vec![0.6, -0.64],
            vec![0.8, 0.48],
            vec![0.0, 0.6],
        ])
        .unwrap();
        let r_expect =
            DenseMatrix::from_rows(vec![vec![10.0, 11.0], vec![0.0, 2.5]]).unwrap();
        assert!(max_abs_diff(&f.q, &q_expect) < 1e-12);
        assert!(max_abs_diff(&f.r, &r_expect) < 1e-12);
    }

    #[test]
    fn factors_satisfy_contracts_on_random_input() {
        let mut rng = RngStream::new(7, 0);
        for &(m, n) in &[(5usize, 3usize), (40, 7), (120, 30)] {
            let a = DenseMatrix::from_fn(m, n, |_, _| rng.standard_normal());
            let f = householder_qr(&a).unwrap();

            // ||Q^T Q - I||_F <= 1e-10 sqrt(n)
            let qtq = f.q.transpose().matmul(&f.q).unwrap();
            let mut dev = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let t = qtq.get(i, j) - if i == j { 1.0 } else { 0.0 };
                    dev += t * t;
                }
            }
            assert!(dev.sqrt() <= 1e-10 * (n as f64).sqrt());

            // ||QR - A||_F <= 1e-10 ||A||_F
            let qr = f.q.matmul(&f.r).unwrap();
            let mut diff = 0.0;
            for (x, y) in qr.as_slice().iter().zip(a.as_slice()) {
                diff += (x - y) * (x - y);
            }
            assert!(diff.sqrt() <= 1e-10 * a.frobenius_norm());

            // R upper triangular with non-negative diagonal, exact zeros below.
            for i in 0..n {
                assert!(f.r.get(i, i) >= 0.0);
                for j in 0..i {
                    assert_eq!(f.r.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_wide_matrices() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            householder_qr(&a),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rank_deficient_input_still_factors() {
        // Second column is a multiple of the first.
        let a = DenseMatrix::from_rows(vec![
            vec![1.0, 2.0],
            vec![2.0, 4.0],
            vec![3.0, 6.0],
        ])
        .unwrap();
        let f = householder_qr(&a).unwrap();
        let qr = f.q.matmul(&f.r).unwrap();
        assert!(max_abs_diff(&qr, &a) < 1e-12);
        // Deficiency surfaces as a (numerically) zero trailing diagonal.
        assert!(f.r.get(1, 1).abs() < 1e-12 * f.r.get(0, 0));
    }
}
