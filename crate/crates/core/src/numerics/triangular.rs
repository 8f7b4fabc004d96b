//! Upper-triangular inversion and solves (back substitution).

use super::{DenseMatrix, Vector, RANK_TOL};
use crate::error::{Error, Result};

/// Checks the diagonal of an upper-triangular matrix against the relative
/// rank threshold and returns the first offending index, if any.
fn check_diagonal(r: &DenseMatrix) -> Result<()> {
    let n = r.rows();
    let max_diag = (0..n).map(|i| r.get(i, i).abs()).fold(0.0, f64::max);
    for i in 0..n {
        if r.get(i, i).abs() <= RANK_TOL * max_diag {
            return Err(Error::SingularFactor { index: i });
        }
    }
    Ok(())
}

/// Inverse of an upper-triangular matrix by back substitution, one column of
/// the identity at a time. Only the upper triangle of `r` is read; the result
/// is exactly upper triangular.
///
/// Errors with [`Error::SingularFactor`] (carrying the offending diagonal
/// index) when any `|r_ii|` falls below `RANK_TOL * max_j |r_jj|`.
pub fn invert_upper_triangular(r: &DenseMatrix) -> Result<DenseMatrix> {
    let n = r.rows();
    if n != r.cols() {
        return Err(Error::DimensionMismatch(format!(
            "invert_upper_triangular on a {}x{} matrix",
            r.rows(),
            r.cols()
        )));
    }
    check_diagonal(r)?;

    let mut x = DenseMatrix::zeros(n, n);
    for j in 0..n {
        x.set(j, j, 1.0 / r.get(j, j));
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in i + 1..=j {
                s += r.get(i, k) * x.get(k, j);
            }
            x.set(i, j, -s / r.get(i, i));
        }
    }
    Ok(x)
}

/// Solves `R y = b` for upper-triangular `R`.
pub fn solve_upper_triangular(r: &DenseMatrix, b: &[f64]) -> Result<Vector> {
    let n = r.rows();
    if n != r.cols() || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "solve_upper_triangular: matrix {}x{}, rhs length {}",
            r.rows(),
            r.cols(),
            b.len()
        )));
    }
    check_diagonal(r)?;

    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= r.get(i, k) * y[k];
        }
        y[i] = s / r.get(i, i);
    }
    Ok(Vector::new(y))
}
