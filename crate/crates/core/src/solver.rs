//! The randomized row-projection iteration, its stopping rules, and
//! convergence traces.
//!
//! One iteration projects the iterate onto the hyperplane of a sampled row:
//! `x <- x - (<a_i, x> - b_i) / ||a_i||^2 * a_i`. The preconditioned variant
//! runs the identical iteration on transformed rows `a_i * P` and recovers
//! `x = P y` only when metrics are evaluated, so its per-iteration cost is
//! the row transform plus the projection. Row selection always uses the
//! *original* row norms — the sketch changes the geometry of the projections,
//! not the sampling distribution.
//!
//! Timing discipline: evaluating metrics (error against a reference solution,
//! residual norms) can easily cost more than thousands of iterations, so the
//! solver clock is paused while metrics run. Trace timestamps and
//! `wall_seconds` measure solver work only; for preconditioned runs they
//! start at the preconditioner's build time so that comparisons against the
//! plain method include the setup cost.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::{fmt_f64, solve_upper_triangular, pseudoinverse, Vector};
use crate::precond::{build_sketched_preconditioner, SketchedPreconditioner};
use crate::sampling::{RngStream, RowSampler, RowSamplerKind, RowSource};

/// RNG stream id for row selection. Fixed so that plain and preconditioned
/// runs with the same seed draw the same row sequence.
pub const SOLVER_STREAM: u64 = 1;
/// RNG stream id for sketch-index sampling, disjoint from row selection so
/// building a preconditioner never perturbs the row sequence.
pub const SKETCH_STREAM: u64 = 2;

/// Time budgets are polled every this many iterations; a budget overshoot is
/// therefore bounded by 64 update steps.
const TIME_CHECK_EVERY: u64 = 64;

/// Stopping rules and bookkeeping knobs for one solve.
#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub sampler: RowSamplerKind,
    /// Stop after this many iterations (skipped zero rows count).
    pub max_iters: Option<u64>,
    /// Stop once the solver clock passes this many seconds.
    pub time_budget_seconds: Option<f64>,
    /// Stop once the relative error (needs a reference solution in the
    /// probe) drops to this level; checked only at evaluation points.
    pub target_rel_error: Option<f64>,
    /// Evaluate metrics every this many iterations; `0` means "once per
    /// row count", which keeps metric cost proportional to solve cost.
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            sampler: RowSamplerKind::SquaredNorm,
            max_iters: None,
            time_budget_seconds: None,
            target_rel_error: None,
            eval_every: 0,
            seed: 0,
        }
    }
}

impl SolveConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters.is_none() && self.time_budget_seconds.is_none() {
            return Err(Error::InvalidParameter(
                "solver needs max_iters or time_budget_seconds".into(),
            ));
        }
        if let Some(t) = self.time_budget_seconds {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "time_budget_seconds must be finite and >= 0, got {t}"
                )));
            }
        }
        if let Some(t) = self.target_rel_error {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "target_rel_error must be finite and >= 0, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Why a solve stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Relative error reached the target.
    Converged,
    /// Iteration budget exhausted.
    IterBudget,
    /// Time budget exhausted.
    TimeBudget,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterBudget => "iter_budget",
            SolveStatus::TimeBudget => "time_budget",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One point on the convergence trace. Metrics are `None` when the probe
/// cannot compute them (no reference solution / no residual closure);
/// `elapsed_seconds` is `None` for traces loaded from files written without
/// timing.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    pub elapsed_seconds: Option<f64>,
    pub rel_error: Option<f64>,
    pub residual: Option<f64>,
}

/// Outcome of a solve: final iterate plus the full convergence trace.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: Vector,
    pub iters: u64,
    pub status: SolveStatus,
    pub trace: Vec<TraceRecord>,
    /// Relative error of the last trace record, if the probe computed one.
    pub final_rel_error: Option<f64>,
    /// Final solver-clock reading (setup included, metric time excluded).
    pub wall_seconds: f64,
}

/// What to measure at evaluation points. The solver itself never touches the
/// full matrix; anything that does (residual norms) comes in as a closure so
/// its cost stays out of the timed path by construction.
pub struct ConvergenceProbe<'a> {
    x_star: Option<&'a [f64]>,
    x_star_norm: f64,
    residual: Option<Box<dyn Fn(&[f64]) -> f64 + 'a>>,
}

impl<'a> ConvergenceProbe<'a> {
    /// Measures nothing; traces carry only iteration counts and timestamps.
    pub fn none() -> Self {
        ConvergenceProbe {
            x_star: None,
            x_star_norm: 0.0,
            residual: None,
        }
    }

    /// Tracks relative error `||x - x_star|| / ||x_star||` against a known
    /// solution. Falls back to absolute error when `||x_star|| == 0`.
    pub fn with_x_star(x_star: &'a [f64]) -> Self {
        ConvergenceProbe {
            x_star: Some(x_star),
            x_star_norm: crate::numerics::norm2(x_star),
            residual: None,
        }
    }

    /// Adds a residual metric, e.g. `|x| ||A x - b|| / ||b||`.
    pub fn residual_fn(mut self, f: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        self.residual = Some(Box::new(f));
        self
    }

    pub fn rel_error(&self, x: &[f64]) -> Option<f64> {
        self.x_star.map(|xs| {
            let d = crate::numerics::distance2(x, xs);
            if self.x_star_norm > 0.0 {
                d / self.x_star_norm
            } else {
                d
            }
        })
    }

    pub fn residual(&self, x: &[f64]) -> Option<f64> {
        self.residual.as_ref().map(|f| f(x))
    }
}

/// One projection of `x` onto the hyperplane `<row, x> = rhs`. After the
/// step the row's equation is satisfied to rounding; a zero row has no
/// hyperplane and is an error here (the solve loops skip such rows instead).
pub fn kaczmarz_step(x: &mut [f64], row: &[f64], rhs: f64) -> Result<()> {
    if x.len() != row.len() {
        return Err(Error::DimensionMismatch(format!(
            "kaczmarz_step: x has length {}, row has length {}",
            x.len(),
            row.len()
        )));
    }
    let mut sq_norm = 0.0;
    let mut dot = 0.0;
    for (a, xi) in row.iter().zip(x.iter()) {
        sq_norm += a * a;
        dot += a * xi;
    }
    if sq_norm == 0.0 {
        return Err(Error::ZeroRow);
    }
    let c = (dot - rhs) / sq_norm;
    for (xi, a) in x.iter_mut().zip(row) {
        *xi -= c * a;
    }
    Ok(())
}

/// Expected-error bound for the squared-norm-sampled iteration:
/// `(1 - 1/kappa_f^2)^iters * initial_sq_dist`, where `kappa_f` is
/// `||A||_F / sigma_min(A)` and `initial_sq_dist = ||x_0 - x_star||^2`.
pub fn theoretical_bound(kappa_f: f64, iters: u64, initial_sq_dist: f64) -> f64 {
    debug_assert!(kappa_f >= 1.0, "kappa_f is always >= sqrt(n) >= 1");
    let rate = (1.0 - 1.0 / (kappa_f * kappa_f)).max(0.0);
    rate.powf(iters as f64) * initial_sq_dist
}

// ── The iteration engine ────────────────────────────────────────────────

/// Solver clock with pause/resume, so metric evaluation stays untimed.
struct Clock {
    base: f64,
    seg: Instant,
}

impl Clock {
    fn start(base: f64) -> Self {
        Clock {
            base,
            seg: Instant::now(),
        }
    }
    fn reading(&self) -> f64 {
        self.base + self.seg.elapsed().as_secs_f64()
    }
    /// Folds the running segment into the base; call `resume` to continue.
    fn pause(&mut self) -> f64 {
        self.base = self.reading();
        self.base
    }
    fn resume(&mut self) {
        self.seg = Instant::now();
    }
}

/// Everything that survives a phase switch in the fine-tuned strategy: the
/// iterate, the counters, the trace, and — crucially — the row-selection RNG,
/// so the row sequence is one continuous stream across the switch.
struct EngineState {
    y: Vec<f64>,
    scratch: Vec<f64>,
    iter: u64,
    elapsed: f64,
    trace: Vec<TraceRecord>,
    sampler: RowSampler,
    rng: RngStream,
}

impl EngineState {
    fn fresh(source: &impl RowSource, cfg: &SolveConfig, elapsed: f64) -> Result<Self> {
        let n = source.col_count();
        Ok(EngineState {
            y: vec![0.0; n],
            scratch: vec![0.0; n],
            iter: 0,
            elapsed,
            trace: Vec::new(),
            sampler: RowSampler::new(cfg.sampler, source)?,
            rng: RngStream::new(cfg.seed, SOLVER_STREAM),
        })
    }
}

fn observe(
    pre: Option<&SketchedPreconditioner>,
    probe: &ConvergenceProbe,
    y: &[f64],
) -> Result<(Option<f64>, Option<f64>)> {
    let x;
    let xr: &[f64] = match pre {
        Some(p) => {
            x = p.recover_x(y)?;
            &x
        }
        None => y,
    };
    Ok((probe.rel_error(xr), probe.residual(xr)))
}

/// Runs the iteration until a stopping rule fires. Returns `Some(status)` on
/// a terminal stop and `None` when the non-terminal `phase_end_seconds`
/// cutoff was reached (the fine-tuned switch point).
fn drive(
    source: &impl RowSource,
    pre: Option<&SketchedPreconditioner>,
    cfg: &SolveConfig,
    probe: &ConvergenceProbe,
    st: &mut EngineState,
    phase_end_seconds: Option<f64>,
) -> Result<Option<SolveStatus>> {
    let eval_every = if cfg.eval_every == 0 {
        source.row_count().max(1) as u64
    } else {
        cfg.eval_every as u64
    };
    let mut clock = Clock::start(st.elapsed);

    // Records metrics at the current iterate; skips nothing but duplicate
    // iteration numbers (a budget can fire right on an evaluation point).
    macro_rules! record {
        ($at:expr) => {{
            let (re, res) = observe(pre, probe, &st.y)?;
            if st.trace.last().map(|r| r.iter) != Some(st.iter) {
                st.trace.push(TraceRecord {
                    iter: st.iter,
                    elapsed_seconds: Some($at),
                    rel_error: re,
                    residual: res,
                });
            }
            re
        }};
    }
    // Converged wins over a budget status when the final evaluation happens
    // to reach the target. The run's wall time is pinned to the final trace
    // record's stamp (records dedupe by iteration, so a budget firing right
    // on an evaluation point must not drift past the recorded time).
    macro_rules! finish {
        ($status:expr) => {{
            let at = clock.pause();
            let re = record!(at);
            st.elapsed = st.trace.last().and_then(|r| r.elapsed_seconds).unwrap_or(at);
            let status = match (cfg.target_rel_error, re) {
                (Some(t), Some(e)) if e <= t => SolveStatus::Converged,
                _ => $status,
            };
            return Ok(Some(status));
        }};
    }

    loop {
        if st.iter % eval_every == 0 && st.trace.last().map(|r| r.iter) != Some(st.iter) {
            let at = clock.pause();
            let re = record!(at);
            if let (Some(t), Some(e)) = (cfg.target_rel_error, re) {
                if e <= t {
                    st.elapsed = at;
                    return Ok(Some(SolveStatus::Converged));
                }
            }
            clock.resume();
        }
        if let Some(mi) = cfg.max_iters {
            if st.iter >= mi {
                finish!(SolveStatus::IterBudget);
            }
        }
        if st.iter % TIME_CHECK_EVERY == 0 {
            let now = clock.reading();
            if let Some(tb) = cfg.time_budget_seconds {
                if now >= tb {
                    finish!(SolveStatus::TimeBudget);
                }
            }
            if let Some(pe) = phase_end_seconds {
                if now >= pe {
                    let at = clock.pause();
                    record!(at);
                    st.elapsed = st.trace.last().and_then(|r| r.elapsed_seconds).unwrap_or(at);
                    return Ok(None);
                }
            }
        }

        let i = st.sampler.next_index(&mut st.rng);
        let sq_norm = source.row_sq_norm(i);
        // A zero row constrains nothing: the iteration counter still
        // advances (the draw was spent) but the iterate is untouched.
        if sq_norm > 0.0 {
            let rhs = source.rhs(i);
            match pre {
                None => {
                    let row = source.row(i);
                    let mut dot = 0.0;
                    for (a, yi) in row.iter().zip(st.y.iter()) {
                        dot += a * yi;
                    }
                    let c = (dot - rhs) / sq_norm;
                    for (yi, a) in st.y.iter_mut().zip(row) {
                        *yi -= c * a;
                    }
                }
                Some(p) => {
                    p.apply_right_into(source.row(i), &mut st.scratch);
                    let mut tn = 0.0;
                    let mut dot = 0.0;
                    for (a, yi) in st.scratch.iter().zip(st.y.iter()) {
                        tn += a * a;
                        dot += a * yi;
                    }
                    // Transformed row can vanish if the original row lies in
                    // the null space of a pseudoinverse fallback.
                    if tn > 0.0 {
                        let c = (dot - rhs) / tn;
                        for (yi, a) in st.y.iter_mut().zip(st.scratch.iter()) {
                            *yi -= c * a;
                        }
                    }
                }
            }
        }
        st.iter += 1;
    }
}

fn assemble(
    st: EngineState,
    status: SolveStatus,
    pre: Option<&SketchedPreconditioner>,
) -> Result<SolveResult> {
    let x = match pre {
        Some(p) => p.recover_x(&st.y)?,
        None => Vector::new(st.y),
    };
    let final_rel_error = st.trace.last().and_then(|r| r.rel_error);
    Ok(SolveResult {
        x,
        iters: st.iter,
        status,
        trace: st.trace,
        final_rel_error,
        wall_seconds: st.elapsed,
    })
}

// ── Public solve entry points ───────────────────────────────────────────

/// Plain randomized row-projection solve from `x_0 = 0`.
pub fn kaczmarz_solve(
    source: &impl RowSource,
    cfg: &SolveConfig,
    probe: &ConvergenceProbe,
) -> Result<SolveResult> {
    cfg.validate()?;
    let mut st = EngineState::fresh(source, cfg, 0.0)?;
    let status = drive(source, None, cfg, probe, &mut st, None)?
        .expect("no phase cutoff was set");
    assemble(st, status, None)
}

/// Builds a sketched preconditioner (oversampling `gamma`) and solves in the
/// transformed coordinates. The trace clock starts at the build time, so
/// plots against the plain method include the setup cost.
pub fn preconditioned_kaczmarz_solve(
    source: &impl RowSource,
    gamma: f64,
    cfg: &SolveConfig,
    probe: &ConvergenceProbe,
) -> Result<(SolveResult, SketchedPreconditioner)> {
    cfg.validate()?;
    let mut sketch_rng = RngStream::new(cfg.seed, SKETCH_STREAM);
    let pre = build_sketched_preconditioner(source, gamma, &mut sketch_rng)?;
    let result = solve_with_preconditioner(source, &pre, cfg, probe)?;
    Ok((result, pre))
}

/// Solves with an already-built preconditioner (reused or loaded from disk).
/// The trace clock starts at `pre.build_seconds`.
pub fn solve_with_preconditioner(
    source: &impl RowSource,
    pre: &SketchedPreconditioner,
    cfg: &SolveConfig,
    probe: &ConvergenceProbe,
) -> Result<SolveResult> {
    cfg.validate()?;
    if pre.dim() != source.col_count() {
        return Err(Error::DimensionMismatch(format!(
            "preconditioner is {}x{} but the system has {} columns",
            pre.dim(),
            pre.dim(),
            source.col_count()
        )));
    }
    let mut st = EngineState::fresh(source, cfg, pre.build_seconds)?;
    let status = drive(source, Some(pre), cfg, probe, &mut st, None)?
        .expect("no phase cutoff was set");
    assemble(st, status, Some(pre))
}

/// Plain iteration until the clock reaches `tau_seconds`, then a sketch is
/// built *mid-run*, the iterate is mapped into the transformed coordinates,
/// and the iteration continues preconditioned. One continuous timeline, one
/// iteration counter, one row-selection stream.
///
/// Returns the preconditioner alongside the result, or `None` when `tau` was
/// at or past the time budget and the run never switched.
pub fn fine_tuned_solve(
    source: &impl RowSource,
    gamma: f64,
    tau_seconds: f64,
    cfg: &SolveConfig,
    probe: &ConvergenceProbe,
) -> Result<(SolveResult, Option<SketchedPreconditioner>)> {
    cfg.validate()?;
    if !tau_seconds.is_finite() || tau_seconds < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "switch time tau must be finite and >= 0, got {tau_seconds}"
        )));
    }
    if let Some(tb) = cfg.time_budget_seconds {
        if tau_seconds >= tb {
            // The switch would never happen; this is exactly the plain solve.
            return Ok((kaczmarz_solve(source, cfg, probe)?, None));
        }
    }

    let mut st = EngineState::fresh(source, cfg, 0.0)?;
    if let Some(status) = drive(source, None, cfg, probe, &mut st, Some(tau_seconds))? {
        // A terminal rule fired before the switch point.
        return Ok((assemble(st, status, None)?, None));
    }

    // Switch: build the sketch and map the iterate x into y with x = P y.
    // Build and mapping time are solver work and stay on the clock.
    let switch = Instant::now();
    let mut sketch_rng = RngStream::new(cfg.seed, SKETCH_STREAM);
    let pre = build_sketched_preconditioner(source, gamma, &mut sketch_rng)?;
    let x = std::mem::take(&mut st.y);
    st.y = if pre.used_pseudoinverse {
        // P has no triangular inverse; y = P^+ x is the least-norm preimage.
        pseudoinverse(pre.matrix())?.matvec(&x)?.into_vec()
    } else {
        solve_upper_triangular(pre.matrix(), &x)?.into_vec()
    };
    st.elapsed += switch.elapsed().as_secs_f64();

    let status = drive(source, Some(&pre), cfg, probe, &mut st, None)?
        .expect("no phase cutoff was set");
    Ok((assemble(st, status, Some(&pre))?, Some(pre)))
}

// ── Trace persistence ───────────────────────────────────────────────────

/// Column header for trace CSV files.
pub const TRACE_HEADER: &str = "iter,elapsed_seconds,rel_error,residual";

/// Writes a trace as CSV. With `include_elapsed = false` the timestamp field
/// is left empty, which makes repeat runs of a seeded solve byte-identical.
pub fn write_trace_csv(path: &Path, records: &[TraceRecord], include_elapsed: bool) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for r in records {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let el = if include_elapsed { opt(r.elapsed_seconds) } else { String::new() };
        writeln!(w, "{},{},{},{}", r.iter, el, opt(r.rel_error), opt(r.residual))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace CSV written by [`write_trace_csv`].
pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == TRACE_HEADER => {}
        Some((_, Ok(h))) => {
            return Err(Error::parse(path, 1, format!("unexpected header {h:?}")))
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => return Err(Error::parse(path, 1, "empty trace file")),
    }

    let mut out = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let iter = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad iter {:?}", fields[0])))?;
        let opt = |s: &str, what: &str| -> Result<Option<f64>> {
            let s = s.trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad {what} {s:?}")))
        };
        out.push(TraceRecord {
            iter,
            elapsed_seconds: opt(fields[1], "elapsed_seconds")?,
            rel_error: opt(fields[2], "rel_error")?,
            residual: opt(fields[3], "residual")?,
        });
    }
    Ok(out)
}
