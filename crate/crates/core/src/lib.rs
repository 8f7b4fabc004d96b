//! Randomized row-action (Kaczmarz) solver for dense overdetermined systems,
//! with sketching-based right preconditioning.
//!
//! The plain solver picks rows with probability proportional to their squared
//! norm and projects the iterate onto each row's hyperplane; its convergence
//! rate is governed by `||A||_F / sigma_min(A)`. The preconditioned variant
//! first samples a small row sketch, QR-factors it, and runs the same
//! iteration on `A * R^{-1}` in transformed coordinates — a cheap setup step
//! that can collapse the condition number by orders of magnitude.
//!
//! Organization:
//! - [`numerics`]: dense matrices, QR, Jacobi SVD, triangular solves,
//!   Matrix Market I/O
//! - [`sampling`]: seeded RNG streams, row-selection distributions, sketch
//!   index sampling
//! - [`precond`]: sketch construction, conditioning diagnostics, persistence
//! - [`solver`]: the iteration loop, stopping rules, convergence traces
//! - [`problems`]: reproducible test-problem generators (conditioned random
//!   systems, random-feature regression, parallel-beam tomography)

pub mod error;
pub mod numerics;
pub mod precond;
pub mod problems;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
pub use numerics::{DenseMatrix, Vector};
pub use precond::{
    build_sketched_preconditioner, condition_number, exact_preconditioner, kappa_f,
    SketchedPreconditioner,
};
pub use problems::{GeneratedProblem, ProblemKind};
pub use sampling::{MatrixRowSource, RngStream, RowSampler, RowSamplerKind, RowSource};
pub use solver::{
    fine_tuned_solve, kaczmarz_solve, preconditioned_kaczmarz_solve, solve_with_preconditioner,
    ConvergenceProbe, SolveConfig, SolveResult, SolveStatus, TraceRecord,
};
