//! Sectioned `key = value` experiment configs.
//!
//! The format is line-oriented: `#` starts a comment, blank lines are
//! ignored, `[problem]` / `[run]` / `[methods]` open sections, and every
//! other line is `key = value`. Unknown sections, unknown keys, duplicate
//! keys, and keys that do not apply to the chosen problem kind are all
//! errors with line diagnostics — configs are the experiment provenance, so
//! typos must not pass silently.
//!
//! ```text
//! [problem]
//! kind = random_conditioned   # random_conditioned | rff | parallel_tomo
//! m = 2000                    # rows                (random_conditioned, rff)
//! n = 50                      # columns             (random_conditioned)
//! cond = 1e5                  # condition target    (random_conditioned)
//! noise_sigma = 1e-4          # optional rhs noise  (random_conditioned)
//! d = 5                       # input dimension     (rff; system has 2d columns)
//! sigma = 1.0                 # frequency scale     (rff)
//! q = 16                      # grid side           (parallel_tomo)
//! n_angles = 36               # optional            (parallel_tomo)
//! n_rays = 23                 # optional            (parallel_tomo)
//!
//! [run]
//! seeds = 0 1 2               # required, space-separated
//! sampler = squared_norm      # uniform | squared_norm | cyclic
//! max_iters = 80000           # at least one budget (max_iters or
//! time_budget_seconds = 5.0   #   time_budget_seconds) is required
//! target_rel_error = 1e-8     # optional early stop
//! eval_every = 0              # metric cadence; 0 = once per row count
//! timing = wall               # wall | none; `none` leaves every clock
//!                             #   column empty so reruns are byte-identical
//! out_dir = runs/exp          # SKZ_OUT_DIR overrides at runtime
//!
//! [methods]
//! plain = true
//! preconditioned = 2 3        # oversampling factors, each >= 1
//! fine_tuned = 2:0.5 3:1.0    # gamma:tau_seconds pairs
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use skaczmarz::sampling::RowSamplerKind;
use skaczmarz::{Error, Result};

/// Problem family plus its resolved parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    RandomConditioned {
        m: usize,
        n: usize,
        cond: f64,
        noise_sigma: Option<f64>,
    },
    Rff {
        m: usize,
        d: usize,
        sigma: f64,
    },
    ParallelTomo {
        q: usize,
        n_angles: usize,
        n_rays: usize,
    },
}

impl ProblemSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemSpec::RandomConditioned { .. } => "random_conditioned",
            ProblemSpec::Rff { .. } => "rff",
            ProblemSpec::ParallelTomo { .. } => "parallel_tomo",
        }
    }
}

/// Whether runs report wall-clock columns. With `None`, elapsed/wall/build
/// columns stay empty and outputs depend only on seeds, so a rerun of the
/// same config is byte-identical.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimingMode {
    Wall,
    None,
}

#[derive(Clone, Debug)]
pub struct RunSpec {
    pub seeds: Vec<u64>,
    pub sampler: RowSamplerKind,
    pub max_iters: Option<u64>,
    pub time_budget_seconds: Option<f64>,
    pub target_rel_error: Option<f64>,
    pub eval_every: usize,
    pub timing: TimingMode,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, Default)]
pub struct MethodSpec {
    pub plain: bool,
    /// Oversampling factors for preconditioned-from-the-start runs.
    pub preconditioned: Vec<f64>,
    /// `(gamma, tau_seconds)` pairs for mid-run switches.
    pub fine_tuned: Vec<(f64, f64)>,
}

impl MethodSpec {
    pub fn is_empty(&self) -> bool {
        !self.plain && self.preconditioned.is_empty() && self.fine_tuned.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub run: RunSpec,
    pub methods: MethodSpec,
}

pub fn sampler_name(kind: RowSamplerKind) -> &'static str {
    match kind {
        RowSamplerKind::Uniform => "uniform",
        RowSamplerKind::SquaredNorm => "squared_norm",
        RowSamplerKind::Cyclic => "cyclic",
    }
}

impl ExperimentConfig {
    /// The resolved config echoed back as valid config text, for manifests.
    pub fn manifest_text(&self) -> String {
        let mut out = String::from("[problem]\n");
        match &self.problem {
            ProblemSpec::RandomConditioned {
                m,
                n,
                cond,
                noise_sigma,
            } => {
                out += &format!("kind = random_conditioned\nm = {m}\nn = {n}\ncond = {cond}\n");
                if let Some(s) = noise_sigma {
                    out += &format!("noise_sigma = {s}\n");
                }
            }
            ProblemSpec::Rff { m, d, sigma } => {
                out += &format!("kind = rff\nm = {m}\nd = {d}\nsigma = {sigma}\n");
            }
            ProblemSpec::ParallelTomo {
                q,
                n_angles,
                n_rays,
            } => {
                out += &format!(
                    "kind = parallel_tomo\nq = {q}\nn_angles = {n_angles}\nn_rays = {n_rays}\n"
                );
            }
        }
        out += "\n[run]\n";
        let seeds: Vec<String> = self.run.seeds.iter().map(u64::to_string).collect();
        out += &format!("seeds = {}\n", seeds.join(" "));
        out += &format!("sampler = {}\n", sampler_name(self.run.sampler));
        if let Some(v) = self.run.max_iters {
            out += &format!("max_iters = {v}\n");
        }
        if let Some(v) = self.run.time_budget_seconds {
            out += &format!("time_budget_seconds = {v}\n");
        }
        if let Some(v) = self.run.target_rel_error {
            out += &format!("target_rel_error = {v}\n");
        }
        out += &format!("eval_every = {}\n", self.run.eval_every);
        out += &format!(
            "timing = {}\n",
            match self.run.timing {
                TimingMode::Wall => "wall",
                TimingMode::None => "none",
            }
        );
        out += &format!("out_dir = {}\n", self.run.out_dir.display());
        out += "\n[methods]\n";
        out += &format!("plain = {}\n", self.methods.plain);
        if !self.methods.preconditioned.is_empty() {
            let gs: Vec<String> = self.methods.preconditioned.iter().map(f64::to_string).collect();
            out += &format!("preconditioned = {}\n", gs.join(" "));
        }
        if !self.methods.fine_tuned.is_empty() {
            let fs: Vec<String> = self
                .methods
                .fine_tuned
                .iter()
                .map(|(g, t)| format!("{g}:{t}"))
                .collect();
            out += &format!("fine_tuned = {}\n", fs.join(" "));
        }
        out
    }
}

// ── Parsing ─────────────────────────────────────────────────────────────

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Raw `(value, line)` pairs for one section, consumed key by key so that
/// anything left over can be reported as unknown.
struct Section(BTreeMap<String, (String, usize)>);

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.0.remove(key)
    }

    fn take_parsed<T: FromStr>(&mut self, path: &Path, key: &str) -> Result<Option<T>> {
        match self.0.remove(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                parse_err(path, line, format!("invalid value {v:?} for key {key:?}"))
            }),
        }
    }

    fn reject_leftovers(&self, path: &Path, section: &str) -> Result<()> {
        if let Some((key, (_, line))) = self.0.iter().next() {
            return Err(parse_err(
                path,
                *line,
                format!("unknown key {key:?} in section [{section}]"),
            ));
        }
        Ok(())
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(path, &text)
}

pub fn parse_config_str(path: &Path, text: &str) -> Result<ExperimentConfig> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(parse_err(path, line_no, "unterminated section header"));
            };
            if !matches!(name, "problem" | "run" | "methods") {
                return Err(parse_err(path, line_no, format!("unknown section [{name}]")));
            }
            current = Some(name.to_string());
            sections
                .entry(name.to_string())
                .or_insert_with(|| Section(BTreeMap::new()));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_err(path, line_no, "expected `key = value`"));
        };
        let Some(section) = &current else {
            return Err(parse_err(path, line_no, "key before any [section] header"));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let slot = sections.get_mut(section).expect("section was inserted");
        if slot.0.insert(key.clone(), (value, line_no)).is_some() {
            return Err(parse_err(
                path,
                line_no,
                format!("duplicate key {key:?} in section [{section}]"),
            ));
        }
    }

    let mut problem = sections
        .remove("problem")
        .ok_or_else(|| parse_err(path, 1, "missing [problem] section"))?;
    let mut run = sections
        .remove("run")
        .ok_or_else(|| parse_err(path, 1, "missing [run] section"))?;
    let mut methods = sections
        .remove("methods")
        .ok_or_else(|| parse_err(path, 1, "missing [methods] section"))?;

    let problem = build_problem(path, &mut problem)?;
    let methods = build_methods(path, &mut methods)?;
    let run = build_run(path, &mut run, &methods)?;
    Ok(ExperimentConfig {
        problem,
        run,
        methods,
    })
}

fn require<T>(path: &Path, opt: Option<T>, key: &str, section: &str) -> Result<T> {
    opt.ok_or_else(|| {
        parse_err(
            path,
            1,
            format!("missing required key {key:?} in section [{section}]"),
        )
    })
}

fn build_problem(path: &Path, s: &mut Section) -> Result<ProblemSpec> {
    let (kind, kind_line) = require(path, s.take("kind"), "kind", "problem")?;
    let spec = match kind.as_str() {
        "random_conditioned" => {
            let m = require(path, s.take_parsed(path, "m")?, "m", "problem")?;
            let n = require(path, s.take_parsed(path, "n")?, "n", "problem")?;
            let cond = require(path, s.take_parsed(path, "cond")?, "cond", "problem")?;
            let noise_sigma = s.take_parsed(path, "noise_sigma")?;
            if let Some(ns) = noise_sigma {
                if !(ns >= 0.0) {
                    return Err(parse_err(path, 1, "noise_sigma must be >= 0"));
                }
            }
            ProblemSpec::RandomConditioned {
                m,
                n,
                cond,
                noise_sigma,
            }
        }
        "rff" => ProblemSpec::Rff {
            m: require(path, s.take_parsed(path, "m")?, "m", "problem")?,
            d: require(path, s.take_parsed(path, "d")?, "d", "problem")?,
            sigma: require(path, s.take_parsed(path, "sigma")?, "sigma", "problem")?,
        },
        "parallel_tomo" => {
            let q = require(path, s.take_parsed(path, "q")?, "q", "problem")?;
            ProblemSpec::ParallelTomo {
                q,
                n_angles: s
                    .take_parsed(path, "n_angles")?
                    .unwrap_or(skaczmarz::problems::DEFAULT_N_ANGLES),
                n_rays: s
                    .take_parsed(path, "n_rays")?
                    .unwrap_or_else(|| skaczmarz::problems::default_n_rays(q)),
            }
        }
        other => {
            return Err(parse_err(
                path,
                kind_line,
                format!("unknown problem kind {other:?}"),
            ))
        }
    };
    // Keys from a different family are almost certainly a config mistake.
    s.reject_leftovers(path, "problem")?;
    Ok(spec)
}

fn build_methods(path: &Path, s: &mut Section) -> Result<MethodSpec> {
    let mut spec = MethodSpec::default();
    if let Some((v, line)) = s.take("plain") {
        spec.plain = v
            .parse()
            .map_err(|_| parse_err(path, line, format!("plain must be true or false, got {v:?}")))?;
    }
    if let Some((v, line)) = s.take("preconditioned") {
        for tok in v.split_whitespace() {
            let g: f64 = tok.parse().map_err(|_| {
                parse_err(path, line, format!("invalid oversampling factor {tok:?}"))
            })?;
            if !(g >= 1.0) || !g.is_finite() {
                return Err(parse_err(
                    path,
                    line,
                    format!("oversampling factor must be >= 1, got {g}"),
                ));
            }
            spec.preconditioned.push(g);
        }
    }
    if let Some((v, line)) = s.take("fine_tuned") {
        for tok in v.split_whitespace() {
            let Some((g, t)) = tok.split_once(':') else {
                return Err(parse_err(
                    path,
                    line,
                    format!("fine_tuned entries must be gamma:tau_seconds, got {tok:?}"),
                ));
            };
            let g: f64 = g
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid gamma in {tok:?}")))?;
            let t: f64 = t
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid tau in {tok:?}")))?;
            if !(g >= 1.0) || !g.is_finite() {
                return Err(parse_err(
                    path,
                    line,
                    format!("oversampling factor must be >= 1, got {g}"),
                ));
            }
            if !(t >= 0.0) || !t.is_finite() {
                return Err(parse_err(
                    path,
                    line,
                    format!("switch time must be >= 0, got {t}"),
                ));
            }
            spec.fine_tuned.push((g, t));
        }
    }
    s.reject_leftovers(path, "methods")?;
    if spec.is_empty() {
        return Err(parse_err(path, 1, "no methods enabled in [methods]"));
    }
    Ok(spec)
}

fn build_run(path: &Path, s: &mut Section, methods: &MethodSpec) -> Result<RunSpec> {
    let (seeds_raw, seeds_line) = require(path, s.take("seeds"), "seeds", "run")?;
    let mut seeds = Vec::new();
    for tok in seeds_raw.split_whitespace() {
        seeds.push(tok.parse::<u64>().map_err(|_| {
            parse_err(path, seeds_line, format!("invalid seed {tok:?}"))
        })?);
    }
    if seeds.is_empty() {
        return Err(parse_err(path, seeds_line, "seeds must not be empty"));
    }

    let sampler = match s.take("sampler") {
        None => RowSamplerKind::SquaredNorm,
        Some((v, line)) => match v.as_str() {
            "uniform" => RowSamplerKind::Uniform,
            "squared_norm" => RowSamplerKind::SquaredNorm,
            "cyclic" => RowSamplerKind::Cyclic,
            other => {
                return Err(parse_err(
                    path,
                    line,
                    format!("unknown sampler {other:?} (expected uniform, squared_norm or cyclic)"),
                ))
            }
        },
    };

    let timing = match s.take("timing") {
        None => TimingMode::Wall,
        Some((v, line)) => match v.as_str() {
            "wall" => TimingMode::Wall,
            "none" => TimingMode::None,
            other => {
                return Err(parse_err(
                    path,
                    line,
                    format!("unknown timing mode {other:?} (expected wall or none)"),
                ))
            }
        },
    };

    let max_iters = s.take_parsed(path, "max_iters")?;
    let time_budget_seconds: Option<f64> = s.take_parsed(path, "time_budget_seconds")?;
    let target_rel_error = s.take_parsed(path, "target_rel_error")?;
    let eval_every = s.take_parsed(path, "eval_every")?.unwrap_or(0);
    let out_dir: PathBuf = s
        .take("out_dir")
        .map(|(v, _)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("runs"));
    s.reject_leftovers(path, "run")?;

    if max_iters.is_none() && time_budget_seconds.is_none() {
        return Err(parse_err(
            path,
            1,
            "at least one of max_iters / time_budget_seconds is required in [run]",
        ));
    }
    if timing == TimingMode::None {
        // Without a clock there is nothing to cut a time budget or a
        // fine-tuning switch against.
        if time_budget_seconds.is_some() {
            return Err(parse_err(
                path,
                1,
                "timing = none is incompatible with time_budget_seconds",
            ));
        }
        if !methods.fine_tuned.is_empty() {
            return Err(parse_err(
                path,
                1,
                "timing = none is incompatible with fine_tuned methods (the switch is wall-clock based)",
            ));
        }
    }

    Ok(RunSpec {
        seeds,
        sampler,
        max_iters,
        time_budget_seconds,
        target_rel_error,
        eval_every,
        timing,
        out_dir,
    })
}
