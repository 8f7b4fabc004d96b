//! Kernel regression test problems via random Fourier features.
//!
//! Sample points `z_j` uniform on the unit square, evaluate a fixed smooth
//! test function there, and fit it with the explicit feature map
//! `cos/sin(z M)` for a Gaussian kernel: `B = Z M` with `M ~ N(0, sigma^2)`,
//! and the design matrix interleaves cosine and sine columns pairwise. For
//! growing feature count `d` the system becomes numerically consistent, which
//! is the regime the solver experiments probe. No `1/sqrt(d)` feature scaling
//! is applied, so residual magnitudes compare directly across `d`.

use std::collections::BTreeMap;

use super::{GeneratedProblem, ProblemKind};
use crate::error::{Error, Result};
use crate::numerics::{
    fmt_f64, householder_qr, solve_upper_triangular, DenseMatrix, Vector,
};
use crate::sampling::RngStream;

/// Parameters of the regression target
/// `f(x) = a^T x + c + alpha * exp(-(||x|| - mu)^2 / sigma_f)`.
#[derive(Clone, Copy, Debug)]
pub struct TestFunctionParams {
    pub a: [f64; 2],
    pub c: f64,
    pub alpha: f64,
    pub mu: f64,
    pub sigma_f: f64,
}

impl Default for TestFunctionParams {
    fn default() -> Self {
        TestFunctionParams {
            a: [1.0, 1.0],
            c: 1.0,
            alpha: 0.1,
            mu: 0.0,
            sigma_f: 1.0,
        }
    }
}

/// The smooth 2-D regression target: affine part plus a radial Gaussian
/// bump. Requires `sigma_f > 0`.
pub fn test_function_f(x: [f64; 2], p: &TestFunctionParams) -> f64 {
    debug_assert!(p.sigma_f > 0.0);
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    p.a[0] * x[0] + p.a[1] * x[1] + p.c + p.alpha * (-(r - p.mu).powi(2) / p.sigma_f).exp()
}

/// Pairwise cos/sin interleaving: feature j of `B` becomes columns `2j`
/// (cosine) and `2j + 1` (sine) of the design matrix.
fn interleaved_features(b: &DenseMatrix) -> DenseMatrix {
    let (m, d) = (b.rows(), b.cols());
    DenseMatrix::from_fn(m, 2 * d, |i, j| {
        let v = b.get(i, j / 2);
        if j % 2 == 0 {
            v.cos()
        } else {
            v.sin()
        }
    })
}

/// Dense least-squares fit via QR; returns `||A x_hat - b|| / ||b||`.
fn lsq_rel_residual(a: &DenseMatrix, b: &Vector) -> Result<f64> {
    let f = householder_qr(a)?;
    let qtb = f.q.transpose().matvec(b)?;
    let x_hat = solve_upper_triangular(&f.r, &qtb)?;
    let ax = a.matvec(&x_hat)?;
    Ok(crate::numerics::distance2(&ax, b) / b.norm2())
}

/// Builds the `m x 2d` random-feature system for the default test function.
///
/// Draw order is fixed: the sample points `Z` (row-major), then the
/// frequency matrix `M`. There is no planted solution; the metadata records
/// the least-squares relative residual of the assembled system, which is the
/// natural convergence floor for row-action solvers on it.
pub fn gen_rff_problem(
    m: usize,
    d: usize,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<GeneratedProblem> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "feature count d must be >= 2, got {d}"
        )));
    }
    if m < 2 * d {
        return Err(Error::DimensionMismatch(format!(
            "rff generator needs m >= 2d, got m = {m}, d = {d}"
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "frequency sigma must be finite and > 0, got {sigma}"
        )));
    }

    let z = DenseMatrix::from_fn(m, 2, |_, _| rng.uniform());
    let freq = DenseMatrix::from_fn(2, d, |_, _| sigma * rng.standard_normal());
    let b_mat = z.matmul(&freq)?;
    let a = interleaved_features(&b_mat);

    let params = TestFunctionParams::default();
    let b = Vector::new(
        (0..m)
            .map(|i| test_function_f([z.get(i, 0), z.get(i, 1)], &params))
            .collect(),
    );

    let mut metadata = BTreeMap::new();
    metadata.insert("m".into(), m.to_string());
    metadata.insert("d".into(), d.to_string());
    metadata.insert("sigma".into(), fmt_f64(sigma));
    metadata.insert(
        "lsq_rel_residual".into(),
        fmt_f64(lsq_rel_residual(&a, &b)?),
    );

    Ok(GeneratedProblem {
        a,
        b,
        x_star: None,
        kind: ProblemKind::Rff,
        metadata,
    })
}
