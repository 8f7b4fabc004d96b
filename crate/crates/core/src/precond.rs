//! Sketching-based right preconditioners and conditioning diagnostics.
//!
//! The construction: sample `r = ceil(gamma * n)` distinct rows of `A`
//! uniformly, QR-factor the sampled block `Ahat`, and use `Rhat^{-1}` as a
//! right preconditioner. When the sampled block is rank deficient the
//! triangular inverse does not exist and the Moore-Penrose pseudoinverse of
//! `Rhat` is used instead (`used_pseudoinverse` records this).
//!
//! With a good sketch, `A * Rhat^{-1}` has singular values clustered near
//! one, which is what accelerates the row-action solver downstream.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::{
    householder_qr, invert_upper_triangular, pseudoinverse, read_matrix_market,
    singular_values, write_matrix_market_array, DenseMatrix, Vector,
};
use crate::sampling::{sample_sketch_indices, RngStream, RowSource};

/// Guard for conditioning diagnostics: a smallest singular value below
/// `SIGMA_MIN_CUTOFF * sigma_max` means the ratio is numerically meaningless.
const SIGMA_MIN_CUTOFF: f64 = 1e-14;

/// A right preconditioner built from a sampled-row sketch.
#[derive(Clone, Debug)]
pub struct SketchedPreconditioner {
    /// The preconditioner matrix `P` (n x n). Upper triangular unless the
    /// pseudoinverse fallback fired.
    p: DenseMatrix,
    /// Requested oversampling factor (`r ~ gamma * n`).
    pub gamma: f64,
    /// Number of sampled rows.
    pub r: usize,
    /// Sampled row indices, sorted ascending.
    pub indices: Vec<usize>,
    /// True when `Rhat` was singular and `P = pinv(Rhat)`.
    pub used_pseudoinverse: bool,
    /// Wall-clock seconds spent building (sampling + QR + inversion).
    pub build_seconds: f64,
}

impl SketchedPreconditioner {
    /// Side length of the (square) preconditioner.
    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.p
    }

    /// The identity preconditioner; preconditioned iteration with it reduces
    /// exactly to the plain method. Mainly useful for equivalence tests.
    pub fn identity(n: usize) -> Self {
        SketchedPreconditioner {
            p: DenseMatrix::identity(n),
            gamma: 1.0,
            r: n,
            indices: (0..n).collect(),
            used_pseudoinverse: false,
            build_seconds: 0.0,
        }
    }

    /// Transformed row `row * P` written into `out` (length n).
    ///
    /// Zero entries of `row` are skipped; for sparse rows (tomography) this
    /// is the difference between O(nnz * n) and O(n^2) per iteration. The
    /// triangular structure of a non-fallback `P` is exploited the same way.
    pub fn apply_right_into(&self, row: &[f64], out: &mut [f64]) {
        let n = self.p.rows();
        debug_assert_eq!(row.len(), n);
        debug_assert_eq!(out.len(), n);
        out.fill(0.0);
        let triangular = !self.used_pseudoinverse;
        for (i, &xi) in row.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let prow = self.p.row(i);
            let start = if triangular { i } else { 0 };
            for (o, p) in out[start..].iter_mut().zip(&prow[start..]) {
                *o += xi * p;
            }
        }
    }

    /// Transformed row `row * P` as a fresh vector.
    pub fn apply_right(&self, row: &[f64]) -> Result<Vector> {
        if row.len() != self.p.rows() {
            return Err(Error::DimensionMismatch(format!(
                "apply_right: row has length {}, preconditioner is {}x{}",
                row.len(),
                self.p.rows(),
                self.p.cols()
            )));
        }
        let mut out = vec![0.0; row.len()];
        self.apply_right_into(row, &mut out);
        Ok(Vector::new(out))
    }

    /// Recovers the original-coordinate iterate `x = P y`.
    pub fn recover_x(&self, y: &[f64]) -> Result<Vector> {
        self.p.matvec(y)
    }
}

/// Builds the sketched right preconditioner from `gamma * n` sampled rows.
///
/// `r` is clamped to `[n, m]`: fewer than `n` rows can never produce a
/// full-rank sketch and more than `m` distinct rows do not exist. Requires
/// `gamma >= 1`.
pub fn build_sketched_preconditioner(
    source: &impl RowSource,
    gamma: f64,
    rng: &mut RngStream,
) -> Result<SketchedPreconditioner> {
    let m = source.row_count();
    let n = source.col_count();
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sketch oversampling gamma must be >= 1, got {gamma}"
        )));
    }
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "sketched preconditioner needs rows >= cols, got {m}x{n}"
        )));
    }

    let start = Instant::now();
    let r = ((gamma * n as f64).ceil() as usize).clamp(n, m);
    let indices = sample_sketch_indices(m, r, rng)?;

    let mut sketch = DenseMatrix::zeros(r, n);
    for (k, &i) in indices.iter().enumerate() {
        sketch.row_mut(k).copy_from_slice(source.row(i));
    }
    if !sketch.is_finite() {
        return Err(Error::NonFinite("sampled sketch rows".into()));
    }

    let factors = householder_qr(&sketch)?;
    let (p, used_pseudoinverse) = match invert_upper_triangular(&factors.r) {
        Ok(inv) => (inv, false),
        Err(Error::SingularFactor { .. }) => (pseudoinverse(&factors.r)?, true),
        Err(e) => return Err(e),
    };

    Ok(SketchedPreconditioner {
        p,
        gamma,
        r,
        indices,
        used_pseudoinverse,
        build_seconds: start.elapsed().as_secs_f64(),
    })
}

/// The exact right preconditioner `R^{-1}` from a full QR of `A`. Requires
/// full column rank; `A R^{-1}` then has orthonormal columns, i.e. condition
/// number one.
pub fn exact_preconditioner(a: &DenseMatrix) -> Result<DenseMatrix> {
    let factors = householder_qr(a)?;
    invert_upper_triangular(&factors.r)
}

// ── Conditioning diagnostics ────────────────────────────────────────────

/// Scaled condition number `||A||_F / sigma_min(A)`.
///
/// This is the quantity that controls the expected per-iteration contraction
/// of the randomized row-action solver. It always satisfies
/// `kappa_f <= sqrt(n) * k(A)`.
pub fn kappa_f(a: &DenseMatrix) -> Result<f64> {
    let sv = singular_values(a)?;
    let sigma_max = sv[0];
    let sigma_min = sv[sv.len() - 1];
    if sigma_min <= SIGMA_MIN_CUTOFF * sigma_max {
        return Err(Error::ConditioningOverflow { sigma_min });
    }
    Ok(a.frobenius_norm() / sigma_min)
}

/// Classical condition number `sigma_max / sigma_min`.
pub fn condition_number(a: &DenseMatrix) -> Result<f64> {
    let sv = singular_values(a)?;
    let sigma_max = sv[0];
    let sigma_min = sv[sv.len() - 1];
    if sigma_min <= SIGMA_MIN_CUTOFF * sigma_max {
        return Err(Error::ConditioningOverflow { sigma_min });
    }
    Ok(sigma_max / sigma_min)
}

/// Coherence of a tall full-column-rank matrix: the largest squared row norm
/// of its thin orthonormal factor `Q`. Always in `[n/m, 1]`; matrices with
/// spread-out row spaces (low coherence) are the ones uniform row sketches
/// capture well. Diagnostic only — never used in the solve path.
pub fn coherence(a: &DenseMatrix) -> Result<f64> {
    let m = a.rows();
    let n = a.cols();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "coherence requires rows >= cols, got {m}x{n}"
        )));
    }
    let factors = householder_qr(a)?;
    // Full column rank is required for Q to be well defined.
    let max_diag = (0..n).map(|i| factors.r.get(i, i)).fold(0.0, f64::max);
    for i in 0..n {
        if factors.r.get(i, i).abs() <= crate::numerics::RANK_TOL * max_diag {
            return Err(Error::SingularFactor { index: i });
        }
    }
    let mu = (0..m)
        .map(|i| {
            let q = factors.q.row(i);
            q.iter().map(|x| x * x).sum::<f64>()
        })
        .fold(0.0, f64::max);
    Ok(mu)
}

// ── Persistence ─────────────────────────────────────────────────────────

/// Writes the preconditioner matrix (Matrix Market array) plus a `key = value`
/// sidecar with the sketch metadata.
pub fn write_preconditioner(
    p: &SketchedPreconditioner,
    matrix_path: &Path,
    meta_path: &Path,
) -> Result<()> {
    write_matrix_market_array(matrix_path, &p.p)?;
    let mut w = BufWriter::new(std::fs::File::create(meta_path)?);
    writeln!(w, "gamma = {}", crate::numerics::fmt_f64(p.gamma))?;
    writeln!(w, "r = {}", p.r)?;
    writeln!(w, "used_pseudoinverse = {}", p.used_pseudoinverse)?;
    writeln!(w, "build_seconds = {}", crate::numerics::fmt_f64(p.build_seconds))?;
    let idx: Vec<String> = p.indices.iter().map(|i| i.to_string()).collect();
    writeln!(w, "indices = {}", idx.join(" "))?;
    w.flush()?;
    Ok(())
}

/// Reads back a preconditioner written by [`write_preconditioner`].
pub fn read_preconditioner(matrix_path: &Path, meta_path: &Path) -> Result<SketchedPreconditioner> {
    let p = read_matrix_market(matrix_path)?;
    if p.rows() != p.cols() {
        return Err(Error::DimensionMismatch(format!(
            "preconditioner matrix must be square, got {}x{}",
            p.rows(),
            p.cols()
        )));
    }

    let mut gamma = None;
    let mut r = None;
    let mut used_pseudoinverse = None;
    let mut build_seconds = None;
    let mut indices = None;

    let reader = BufReader::new(std::fs::File::open(meta_path)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, value) = t.split_once('=').ok_or_else(|| {
            Error::parse(meta_path, lineno + 1, "expected `key = value`")
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::parse(meta_path, lineno + 1, format!("bad {what}: {value:?}"));
        match key {
            "gamma" => gamma = Some(value.parse::<f64>().map_err(|_| bad("gamma"))?),
            "r" => r = Some(value.parse::<usize>().map_err(|_| bad("r"))?),
            "used_pseudoinverse" => {
                used_pseudoinverse =
                    Some(value.parse::<bool>().map_err(|_| bad("used_pseudoinverse"))?)
            }
            "build_seconds" => {
                build_seconds = Some(value.parse::<f64>().map_err(|_| bad("build_seconds"))?)
            }
            "indices" => {
                let parsed: std::result::Result<Vec<usize>, _> =
                    value.split_whitespace().map(|t| t.parse::<usize>()).collect();
                indices = Some(parsed.map_err(|_| bad("indices"))?);
            }
            other => {
                return Err(Error::parse(
                    meta_path,
                    lineno + 1,
                    format!("unknown key {other:?}"),
                ))
            }
        }
    }

    let missing = |what: &str| Error::parse(meta_path, 0, format!("missing key {what:?}"));
    Ok(SketchedPreconditioner {
        p,
        gamma: gamma.ok_or_else(|| missing("gamma"))?,
        r: r.ok_or_else(|| missing("r"))?,
        indices: indices.ok_or_else(|| missing("indices"))?,
        used_pseudoinverse: used_pseudoinverse.ok_or_else(|| missing("used_pseudoinverse"))?,
        build_seconds: build_seconds.ok_or_else(|| missing("build_seconds"))?,
    })
}
