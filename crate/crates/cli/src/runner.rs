//! Executes a parsed experiment config: generates one problem per seed,
//! runs every enabled method on it, and writes per-run traces plus
//! `summary.csv` and `manifest.txt` into the output directory.
//!
//! Runs execute sequentially in a fixed order (seed-major, then plain /
//! preconditioned / fine-tuned), so output files never race and two
//! invocations of the same config visit identical RNG states.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use skaczmarz::problems::{
    add_noise, gen_parallel_tomo, gen_random_conditioned, gen_rff_problem, GeneratedProblem,
    PROBLEM_STREAM,
};
use skaczmarz::sampling::{MatrixRowSource, RngStream};
use skaczmarz::solver::{
    fine_tuned_solve, kaczmarz_solve, preconditioned_kaczmarz_solve, write_trace_csv,
    ConvergenceProbe, SolveConfig, SolveResult,
};
use skaczmarz::{Result, SketchedPreconditioner};

use crate::config::{ExperimentConfig, ProblemSpec, TimingMode};

/// Environment variable that redirects all outputs; every science parameter
/// stays in the config file.
pub const OUT_DIR_ENV: &str = "SKZ_OUT_DIR";

pub const SUMMARY_HEADER: &str = "method,gamma,tau_seconds,seed,status,iters,\
final_rel_error,final_residual,wall_seconds,build_seconds,used_pseudoinverse,error";

/// One solver invocation within an experiment.
#[derive(Clone, Debug)]
enum MethodInstance {
    Plain,
    Preconditioned { gamma: f64 },
    FineTuned { gamma: f64, tau: f64 },
}

impl MethodInstance {
    fn name(&self) -> &'static str {
        match self {
            MethodInstance::Plain => "plain",
            MethodInstance::Preconditioned { .. } => "preconditioned",
            MethodInstance::FineTuned { .. } => "fine_tuned",
        }
    }

    fn trace_file(&self, seed: u64) -> String {
        match self {
            MethodInstance::Plain => format!("plain_s{seed}.csv"),
            MethodInstance::Preconditioned { gamma } => format!("precond_g{gamma}_s{seed}.csv"),
            MethodInstance::FineTuned { gamma, tau } => {
                format!("finetuned_g{gamma}_t{tau}_s{seed}.csv")
            }
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV-escapes an error message (the only free-text summary field).
fn quote(msg: &str) -> String {
    format!("\"{}\"", msg.replace('"', "\"\""))
}

fn generate_problem(spec: &ProblemSpec, seed: u64) -> Result<GeneratedProblem> {
    let mut rng = RngStream::new(seed, PROBLEM_STREAM);
    match *spec {
        ProblemSpec::RandomConditioned {
            m,
            n,
            cond,
            noise_sigma,
        } => {
            let problem = gen_random_conditioned(m, n, cond, &mut rng)?;
            match noise_sigma {
                Some(sigma) => add_noise(problem, sigma, &mut rng),
                None => Ok(problem),
            }
        }
        ProblemSpec::Rff { m, d, sigma } => gen_rff_problem(m, d, sigma, &mut rng),
        ProblemSpec::ParallelTomo {
            q,
            n_angles,
            n_rays,
        } => gen_parallel_tomo(q, n_angles, n_rays),
    }
}

/// Output of one run that made it to completion.
struct RunRecord {
    result: SolveResult,
    pre: Option<SketchedPreconditioner>,
}

fn run_method(
    problem: &GeneratedProblem,
    method: &MethodInstance,
    cfg: &SolveConfig,
) -> Result<RunRecord> {
    let source = MatrixRowSource::new(&problem.a, &problem.b)?;
    let b_norm = problem.b.norm2();
    let residual = |x: &[f64]| {
        let ax = problem.a.matvec(x).expect("probe dimensions are fixed");
        let mut ssq = 0.0;
        for (ai, bi) in ax.as_slice().iter().zip(problem.b.as_slice()) {
            ssq += (ai - bi) * (ai - bi);
        }
        ssq.sqrt() / b_norm.max(f64::MIN_POSITIVE)
    };
    let probe = match &problem.x_star {
        Some(xs) => ConvergenceProbe::with_x_star(xs).residual_fn(residual),
        None => ConvergenceProbe::none().residual_fn(residual),
    };

    let (result, pre) = match *method {
        MethodInstance::Plain => (kaczmarz_solve(&source, cfg, &probe)?, None),
        MethodInstance::Preconditioned { gamma } => {
            let (r, p) = preconditioned_kaczmarz_solve(&source, gamma, cfg, &probe)?;
            (r, Some(p))
        }
        MethodInstance::FineTuned { gamma, tau } => {
            let (r, p) = fine_tuned_solve(&source, gamma, tau, cfg, &probe)?;
            (r, p)
        }
    };
    Ok(RunRecord { result, pre })
}

fn summary_row(
    method: &MethodInstance,
    seed: u64,
    outcome: &Result<RunRecord>,
    timing: TimingMode,
) -> String {
    let mut row = String::new();
    let (gamma, tau) = match *method {
        MethodInstance::Plain => (String::new(), String::new()),
        MethodInstance::Preconditioned { gamma } => (gamma.to_string(), String::new()),
        MethodInstance::FineTuned { gamma, tau } => (gamma.to_string(), tau.to_string()),
    };
    let _ = write!(row, "{},{gamma},{tau},{seed},", method.name());
    match outcome {
        Ok(rec) => {
            let final_residual = rec
                .result
                .trace
                .last()
                .and_then(|r| r.residual)
                .map(fmt)
                .unwrap_or_default();
            let final_rel = rec.result.final_rel_error.map(fmt).unwrap_or_default();
            let (wall, build) = match timing {
                TimingMode::None => (String::new(), String::new()),
                TimingMode::Wall => (
                    fmt(rec.result.wall_seconds),
                    rec.pre
                        .as_ref()
                        .map(|p| fmt(p.build_seconds))
                        .unwrap_or_default(),
                ),
            };
            let pinv = rec
                .pre
                .as_ref()
                .map(|p| p.used_pseudoinverse.to_string())
                .unwrap_or_default();
            let _ = write!(
                row,
                "{},{},{final_rel},{final_residual},{wall},{build},{pinv},",
                rec.result.status.as_str(),
                rec.result.iters,
            );
        }
        Err(e) => {
            let _ = write!(row, ",,,,,,,{}", quote(&e.to_string()));
        }
    }
    row
}

/// Runs the whole experiment. Individual solver failures are recorded in the
/// summary and do not abort the remaining runs; I/O failures do.
pub fn execute(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let out_dir = match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => cfg.run.out_dir.clone(),
    };
    std::fs::create_dir_all(&out_dir)?;

    let manifest = format!(
        "# resolved experiment manifest\n# library version {}\n\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.manifest_text()
    );
    std::fs::write(out_dir.join("manifest.txt"), manifest)?;

    let methods: Vec<MethodInstance> = {
        let mut v = Vec::new();
        if cfg.methods.plain {
            v.push(MethodInstance::Plain);
        }
        v.extend(
            cfg.methods
                .preconditioned
                .iter()
                .map(|&gamma| MethodInstance::Preconditioned { gamma }),
        );
        v.extend(
            cfg.methods
                .fine_tuned
                .iter()
                .map(|&(gamma, tau)| MethodInstance::FineTuned { gamma, tau }),
        );
        v
    };

    let include_elapsed = cfg.run.timing == TimingMode::Wall;
    let mut summary = vec![SUMMARY_HEADER.to_string()];
    for &seed in &cfg.run.seeds {
        let problem = generate_problem(&cfg.problem, seed)?;
        let solve_cfg = SolveConfig {
            sampler: cfg.run.sampler,
            max_iters: cfg.run.max_iters,
            time_budget_seconds: cfg.run.time_budget_seconds,
            target_rel_error: cfg.run.target_rel_error,
            eval_every: cfg.run.eval_every,
            seed,
        };
        for method in &methods {
            let outcome = run_method(&problem, method, &solve_cfg);
            if let Ok(rec) = &outcome {
                let path = out_dir.join(method.trace_file(seed));
                write_trace_csv(&path, &rec.result.trace, include_elapsed)?;
            }
            summary.push(summary_row(method, seed, &outcome, cfg.run.timing));
        }
    }
    std::fs::write(out_dir.join("summary.csv"), summary.join("\n") + "\n")?;
    Ok(out_dir)
}

/// `gen` verb: export the configured problem (first seed) as Matrix Market
/// plus sidecar files.
pub fn export_problem(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let seed = cfg.run.seeds[0];
    let problem = generate_problem(&cfg.problem, seed)?;
    std::fs::create_dir_all(out)?;
    let stem = format!("{}_s{seed}", cfg.problem.kind_name());
    skaczmarz::problems::write_problem(&problem, out, &stem)?;
    Ok(out.join(stem))
}
