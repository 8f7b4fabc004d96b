//! `compare` verb: tabulates convergence traces from a run directory at
//! shared checkpoints and reports where each preconditioned run first drops
//! below the plain run.
//!
//! The axis is wall-clock seconds when every trace recorded elapsed times,
//! otherwise iterations. Checkpoints are restricted to the overlap of all
//! trace ranges; errors between records are interpolated log-linearly (the
//! traces are near-geometric decay curves).

use std::path::Path;

use skaczmarz::solver::{read_trace_csv, TraceRecord};
use skaczmarz::{Error, Result};

const CHECKPOINTS: usize = 8;

struct Series {
    name: String,
    /// `(axis value, metric value)`, sorted by axis, metric strictly present.
    points: Vec<(f64, f64)>,
    uses_residual: bool,
}

fn build_series(name: &str, records: &[TraceRecord], time_axis: bool) -> Option<Series> {
    let has_rel = records.iter().any(|r| r.rel_error.is_some());
    let mut points = Vec::with_capacity(records.len());
    for r in records {
        let x = if time_axis {
            r.elapsed_seconds?
        } else {
            r.iter as f64
        };
        let y = if has_rel { r.rel_error } else { r.residual };
        if let Some(y) = y {
            points.push((x, y));
        }
    }
    if points.is_empty() {
        return None;
    }
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("axis values are finite"));
    Some(Series {
        name: name.to_string(),
        points,
        uses_residual: !has_rel,
    })
}

/// Piecewise interpolation along the axis, geometric in the metric while
/// both endpoints are positive. `x` outside the range clamps to the ends.
fn interp(points: &[(f64, f64)], x: f64) -> f64 {
    let i = points.partition_point(|&(px, _)| px < x);
    if i == 0 {
        return points[0].1;
    }
    if i >= points.len() {
        return points[points.len() - 1].1;
    }
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    if x1 == x0 {
        return y1;
    }
    let t = (x - x0) / (x1 - x0);
    if y0 > 0.0 && y1 > 0.0 {
        (y0.ln() + t * (y1.ln() - y0.ln())).exp()
    } else {
        y0 + t * (y1 - y0)
    }
}

fn seed_tag(name: &str) -> Option<&str> {
    name.rsplit_once("_s").map(|(_, s)| s)
}

/// Reads every trace CSV under `dir` (excluding `summary.csv`) and renders
/// the comparison table. Malformed files are skipped with a warning on
/// standard error.
pub fn render_comparison(dir: &Path) -> Result<String> {
    let mut names: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".csv") && name != "summary.csv" {
            names.push(name);
        }
    }
    names.sort();

    let mut raw: Vec<(String, Vec<TraceRecord>)> = Vec::new();
    for name in &names {
        match read_trace_csv(&dir.join(name)) {
            Ok(records) if !records.is_empty() => raw.push((name.clone(), records)),
            Ok(_) => eprintln!("warning: {name}: empty trace, skipping"),
            Err(e) => eprintln!("warning: {name}: {e}, skipping"),
        }
    }
    if raw.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "no readable traces in {}",
            dir.display()
        )));
    }

    let time_axis = raw
        .iter()
        .all(|(_, rs)| rs.iter().all(|r| r.elapsed_seconds.is_some()));
    let mut series: Vec<Series> = Vec::new();
    for (name, records) in &raw {
        match build_series(name, records, time_axis) {
            Some(s) => series.push(s),
            None => eprintln!("warning: {name}: no rel_error or residual values, skipping"),
        }
    }
    if series.is_empty() {
        return Err(Error::DegenerateInput(
            "no trace carries a convergence metric".into(),
        ));
    }

    let axis_label = if time_axis { "seconds" } else { "iterations" };
    let lo = series
        .iter()
        .map(|s| s.points[0].0)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = series
        .iter()
        .map(|s| s.points[s.points.len() - 1].0)
        .fold(f64::INFINITY, f64::min);

    let mut out = String::new();
    let name_w = series
        .iter()
        .map(|s| s.name.len() + if s.uses_residual { 11 } else { 0 })
        .max()
        .unwrap()
        .max(12);

    if lo > hi {
        out += &format!("no shared {axis_label} range; final values only\n");
    } else {
        out += &format!("axis: {axis_label}, shared range [{lo:.6} .. {hi:.6}]\n");
    }

    // Checkpoint columns (or just the final value when ranges are disjoint).
    let checkpoints: Vec<f64> = if lo > hi {
        Vec::new()
    } else if lo == hi {
        vec![lo]
    } else {
        (0..CHECKPOINTS)
            .map(|k| lo + (hi - lo) * k as f64 / (CHECKPOINTS - 1) as f64)
            .collect()
    };

    out += &format!("{:name_w$}", "trace");
    for c in &checkpoints {
        if time_axis {
            out += &format!(" {c:>11.4}");
        } else {
            out += &format!(" {:>11}", c.round() as u64);
        }
    }
    out += &format!(" {:>11}\n", "final");
    for s in &series {
        let label = if s.uses_residual {
            format!("{} (residual)", s.name)
        } else {
            s.name.clone()
        };
        out += &format!("{label:name_w$}");
        for &c in &checkpoints {
            out += &format!(" {:>11.4e}", interp(&s.points, c));
        }
        out += &format!(" {:>11.4e}\n", s.points[s.points.len() - 1].1);
    }

    // Crossing report: earliest shared-axis point where a non-plain trace
    // drops strictly below its plain counterpart (same seed when present).
    let plain: Vec<&Series> = series
        .iter()
        .filter(|s| s.name.starts_with("plain"))
        .collect();
    let others: Vec<&Series> = series
        .iter()
        .filter(|s| !s.name.starts_with("plain"))
        .collect();
    if !plain.is_empty() && !others.is_empty() && lo <= hi {
        out += "\ncrossings below plain:\n";
        for other in others {
            let baseline = seed_tag(&other.name)
                .and_then(|tag| plain.iter().find(|p| seed_tag(&p.name) == Some(tag)))
                .copied()
                .unwrap_or(plain[0]);
            let mut grid: Vec<f64> = baseline
                .points
                .iter()
                .chain(other.points.iter())
                .map(|&(x, _)| x)
                .filter(|&x| (lo..=hi).contains(&x))
                .collect();
            grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
            grid.dedup();
            let cross = grid
                .iter()
                .find(|&&x| interp(&other.points, x) < interp(&baseline.points, x));
            match cross {
                Some(&x) if time_axis => {
                    out += &format!(
                        "  {}: crosses below {} at {x:.4} s\n",
                        other.name, baseline.name
                    );
                }
                Some(&x) => {
                    out += &format!(
                        "  {}: crosses below {} at iteration {}\n",
                        other.name,
                        baseline.name,
                        x.round() as u64
                    );
                }
                None => {
                    out += &format!(
                        "  {}: never below {} within the shared range\n",
                        other.name, baseline.name
                    );
                }
            }
        }
    }
    Ok(out)
}
