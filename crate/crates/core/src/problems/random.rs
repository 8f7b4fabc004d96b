//! Random overdetermined systems with an exactly prescribed condition number.
//!
//! A raw Gaussian matrix cannot have a large condition number at these sizes,
//! so the spectrum is planted explicitly: `A = U diag(sigma) V^T` with
//! orthonormal factors drawn Haar-like (QR of Gaussian matrices) and
//! geometrically spaced singular values running from 1 down to
//! `1/cond_target`. Condition numbers are then exact by construction and the
//! convergence behaviour depends only on the spectrum.

use std::collections::BTreeMap;

use super::{GeneratedProblem, ProblemKind};
use crate::error::{Error, Result};
use crate::numerics::{fmt_f64, householder_qr, DenseMatrix, Vector};
use crate::sampling::RngStream;

/// Generates a consistent system `b = A x_star` with `k(A) = cond_target`.
///
/// Draw order is fixed (left factor, right factor, solution) so a given
/// stream pins the problem exactly.
pub fn gen_random_conditioned(
    m: usize,
    n: usize,
    cond_target: f64,
    rng: &mut RngStream,
) -> Result<GeneratedProblem> {
    if m < n || n < 2 {
        return Err(Error::DimensionMismatch(format!(
            "conditioned generator needs m >= n >= 2, got {m}x{n}"
        )));
    }
    if !(cond_target >= 1.0) || !cond_target.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cond_target must be finite and >= 1, got {cond_target}"
        )));
    }

    let gauss_u = DenseMatrix::from_fn(m, n, |_, _| rng.standard_normal());
    let gauss_v = DenseMatrix::from_fn(n, n, |_, _| rng.standard_normal());
    let x_star = Vector::new((0..n).map(|_| rng.standard_normal()).collect());

    // QR with the R_ii >= 0 convention makes these Haar-distributed.
    let u = householder_qr(&gauss_u)?.q;
    let v = householder_qr(&gauss_v)?.q;

    // sigma_i = cond^(-i/(n-1)): geometric from 1 down to 1/cond.
    let mut us = u;
    for (i, col_sigma) in (0..n)
        .map(|i| cond_target.powf(-(i as f64) / (n as f64 - 1.0)))
        .enumerate()
    {
        for r in 0..m {
            us.set(r, i, us.get(r, i) * col_sigma);
        }
    }
    let a = us.matmul(&v.transpose())?;
    let b = a.matvec(&x_star)?;

    let mut metadata = BTreeMap::new();
    metadata.insert("m".into(), m.to_string());
    metadata.insert("n".into(), n.to_string());
    metadata.insert("cond_target".into(), fmt_f64(cond_target));

    Ok(GeneratedProblem {
        a,
        b,
        x_star: Some(x_star),
        kind: ProblemKind::RandomConditioned,
        metadata,
    })
}

/// Perturbs the right-hand side with i.i.d. `N(0, sigma^2)` noise. The
/// planted solution is kept as the noiseless ground truth, which is exactly
/// what error-versus-truth plots need.
pub fn add_noise(mut problem: GeneratedProblem, sigma: f64, rng: &mut RngStream) -> Result<GeneratedProblem> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be finite and >= 0, got {sigma}"
        )));
    }
    for bi in problem.b.as_mut_slice() {
        *bi += sigma * rng.standard_normal();
    }
    problem
        .metadata
        .insert("noise_sigma".into(), fmt_f64(sigma));
    Ok(problem)
}
