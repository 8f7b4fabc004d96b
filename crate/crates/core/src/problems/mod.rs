//! Reproducible generators for the three experiment families: conditioned
//! random systems (optionally with a noisy right-hand side), random-feature
//! kernel regression, and desk-scale parallel-beam tomography.
//!
//! Every generator is a pure function of its parameters and an [`RngStream`],
//! so a (seed, stream) pair pins the problem exactly across runs and
//! platforms.

mod random;
mod rff;
mod tomo;

pub use random::{add_noise, gen_random_conditioned};
pub use rff::{gen_rff_problem, test_function_f, TestFunctionParams};
pub use tomo::{
    default_n_rays, gen_parallel_tomo, image_error_map, shepp_logan_phantom, write_matrix_csv,
    PhantomImage, DEFAULT_N_ANGLES,
};

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{
    write_matrix_market_array, write_matrix_market_coordinate, write_vector_text, DenseMatrix,
    Vector,
};

/// RNG stream id for problem generation, disjoint from the solver and sketch
/// streams so the same seed can drive all three without interference.
pub const PROBLEM_STREAM: u64 = 0;

/// Which generator produced a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    RandomConditioned,
    Rff,
    ParallelTomo,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::RandomConditioned => "random_conditioned",
            ProblemKind::Rff => "rff",
            ProblemKind::ParallelTomo => "parallel_tomo",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_conditioned" => Ok(ProblemKind::RandomConditioned),
            "rff" => Ok(ProblemKind::Rff),
            "parallel_tomo" => Ok(ProblemKind::ParallelTomo),
            other => Err(Error::InvalidParameter(format!(
                "unknown problem kind {other:?} (expected random_conditioned, rff or parallel_tomo)"
            ))),
        }
    }
}

/// A generated linear system, optionally with its planted solution.
///
/// `x_star` is present for consistent constructions (the conditioned random
/// family and tomography) and absent for regression problems where only the
/// residual is meaningful. `metadata` carries generator parameters and
/// derived diagnostics as strings, ready for manifests.
#[derive(Clone, Debug)]
pub struct GeneratedProblem {
    pub a: DenseMatrix,
    pub b: Vector,
    pub x_star: Option<Vector>,
    pub kind: ProblemKind,
    pub metadata: BTreeMap<String, String>,
}

impl GeneratedProblem {
    /// Relative consistency residual `||A x_star - b|| / ||b||`, or `None`
    /// when no planted solution exists.
    pub fn consistency_residual(&self) -> Result<Option<f64>> {
        let Some(xs) = &self.x_star else {
            return Ok(None);
        };
        let ax = self.a.matvec(xs)?;
        let bn = self.b.norm2();
        let d = crate::numerics::distance2(&ax, &self.b);
        Ok(Some(if bn > 0.0 { d / bn } else { d }))
    }
}

/// Writes a problem as `<stem>.A.mtx`, `<stem>.b.txt`, `<stem>.x.txt` (when
/// a planted solution exists) and `<stem>.meta` under `dir`. Tomography
/// systems are mostly zeros and go out in coordinate format; the dense
/// families use array format.
pub fn write_problem(problem: &GeneratedProblem, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = |ext: &str| dir.join(format!("{stem}.{ext}"));

    if problem.kind == ProblemKind::ParallelTomo {
        write_matrix_market_coordinate(&path("A.mtx"), &problem.a)?;
    } else {
        write_matrix_market_array(&path("A.mtx"), &problem.a)?;
    }
    write_vector_text(&path("b.txt"), &problem.b)?;
    if let Some(xs) = &problem.x_star {
        write_vector_text(&path("x.txt"), xs)?;
    }

    let mut w = BufWriter::new(std::fs::File::create(path("meta"))?);
    writeln!(w, "kind = {}", problem.kind.as_str())?;
    writeln!(w, "rows = {}", problem.a.rows())?;
    writeln!(w, "cols = {}", problem.a.cols())?;
    for (k, v) in &problem.metadata {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}
