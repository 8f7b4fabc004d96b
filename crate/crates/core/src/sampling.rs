//! Seeded randomness and row-selection strategies.
//!
//! All randomness in the crate flows through [`RngStream`], a ChaCha8
//! generator keyed by `(seed, stream_id)`. Distinct stream ids give
//! independent, reproducible streams from one experiment seed, so e.g. the
//! sketch selection and the per-iteration row draws never interleave.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{dot, DenseMatrix, Vector};

// ── RngStream ───────────────────────────────────────────────────────────

/// Reproducible random stream: same `(seed, stream_id)` always yields the
/// identical sequence, on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform index from `0..m`.
    pub fn uniform_index(&mut self, m: usize) -> usize {
        self.rng.gen_range(0..m)
    }

    /// Standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

// ── Row access ──────────────────────────────────────────────────────────

/// Read access to the rows of a linear system `A x = b`.
///
/// Row-action solvers only ever touch one `(a_i, b_i)` pair per iteration;
/// keeping that contract behind a trait makes it explicit that the solve
/// path never needs the assembled matrix.
pub trait RowSource {
    fn row_count(&self) -> usize;
    fn col_count(&self) -> usize;
    /// Coefficient row `a_i`.
    fn row(&self, i: usize) -> &[f64];
    /// Right-hand side entry `b_i`.
    fn rhs(&self, i: usize) -> f64;
    /// Squared Euclidean norm of row `i`.
    fn row_sq_norm(&self, i: usize) -> f64 {
        let r = self.row(i);
        dot(r, r)
    }
}

/// [`RowSource`] over an in-memory dense system, with row norms precomputed
/// once at construction.
pub struct MatrixRowSource<'a> {
    a: &'a DenseMatrix,
    b: &'a Vector,
    sq_norms: Vec<f64>,
}

impl<'a> MatrixRowSource<'a> {
    pub fn new(a: &'a DenseMatrix, b: &'a Vector) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::DimensionMismatch(format!(
                "system has {} rows but rhs has length {}",
                a.rows(),
                b.len()
            )));
        }
        Ok(MatrixRowSource {
            a,
            b,
            sq_norms: a.row_sq_norms(),
        })
    }
}

impl RowSource for MatrixRowSource<'_> {
    fn row_count(&self) -> usize {
        self.a.rows()
    }
    fn col_count(&self) -> usize {
        self.a.cols()
    }
    fn row(&self, i: usize) -> &[f64] {
        self.a.row(i)
    }
    fn rhs(&self, i: usize) -> f64 {
        self.b[i]
    }
    fn row_sq_norm(&self, i: usize) -> f64 {
        self.sq_norms[i]
    }
}

// ── Row samplers ────────────────────────────────────────────────────────

/// Strategy for picking the next row index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSamplerKind {
    /// Uniform over all rows (with replacement).
    Uniform,
    /// Probability proportional to the squared row norm (with replacement).
    SquaredNorm,
    /// Deterministic sweep `0, 1, ..., m-1, 0, ...`.
    Cyclic,
}

/// Stateful row sampler. Squared-norm sampling precomputes a cumulative
/// distribution (zero rows get weight zero); cyclic sampling keeps a cursor.
pub struct RowSampler {
    kind: RowSamplerKind,
    m: usize,
    cumulative: Vec<f64>,
    cursor: usize,
}

impl RowSampler {
    pub fn new(kind: RowSamplerKind, source: &impl RowSource) -> Result<Self> {
        let m = source.row_count();
        let sq_norms: Vec<f64> = (0..m).map(|i| source.row_sq_norm(i)).collect();
        Self::from_sq_norms(kind, &sq_norms)
    }

    /// Builds a sampler directly from squared row norms.
    pub fn from_sq_norms(kind: RowSamplerKind, sq_norms: &[f64]) -> Result<Self> {
        let m = sq_norms.len();
        if m == 0 {
            return Err(Error::DegenerateDistribution);
        }
        let mut cumulative = Vec::new();
        if kind == RowSamplerKind::SquaredNorm {
            let total: f64 = sq_norms.iter().sum();
            if total <= 0.0 {
                return Err(Error::DegenerateDistribution);
            }
            let mut acc = 0.0;
            cumulative.reserve(m);
            for &w in sq_norms {
                acc += w / total;
                cumulative.push(acc);
            }
            // Guard against rounding in the final partial sum.
            cumulative[m - 1] = 1.0;
        }
        Ok(RowSampler {
            kind,
            m,
            cumulative,
            cursor: 0,
        })
    }

    /// Normalized selection probabilities (empty unless squared-norm).
    pub fn weights(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let w = c - prev;
                prev = c;
                w
            })
            .collect()
    }

    /// Moves the cyclic cursor (next draw returns this index).
    pub fn set_cursor(&mut self, cursor: usize) {
        self.cursor = cursor % self.m;
    }

    /// Draws the next row index.
    pub fn next_index(&mut self, rng: &mut RngStream) -> usize {
        match self.kind {
            RowSamplerKind::Uniform => rng.uniform_index(self.m),
            RowSamplerKind::SquaredNorm => {
                let u = rng.uniform();
                // First index whose cumulative weight exceeds u.
                let idx = self.cumulative.partition_point(|&c| c <= u);
                idx.min(self.m - 1)
            }
            RowSamplerKind::Cyclic => {
                let idx = self.cursor;
                self.cursor = (self.cursor + 1) % self.m;
                idx
            }
        }
    }
}

// ── Sketch selection ────────────────────────────────────────────────────

/// Draws `r` distinct row indices uniformly without replacement and returns
/// them sorted ascending — exactly the action of a binary selection matrix
/// with one unit entry per row, ordered by source row.
pub fn sample_sketch_indices(m: usize, r: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if r == 0 || r > m {
        return Err(Error::InvalidSketchSize { r, m });
    }
    // Partial Fisher-Yates over 0..m; the first r slots end up being a
    // uniform sample without replacement.
    let mut pool: Vec<usize> = (0..m).collect();
    for i in 0..r {
        let j = i + rng.uniform_index(m - i);
        pool.swap(i, j);
    }
    let mut picked: Vec<usize> = pool[..r].to_vec();
    picked.sort_unstable();
    Ok(picked)
}
