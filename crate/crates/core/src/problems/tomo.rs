//! Desk-scale parallel-beam tomography: a rasterized head phantom, a grid
//! ray tracer, and the system matrix builder.
//!
//! The image occupies the unit-pixel grid `[0, q] x [0, q]` with row 0 at the
//! top; matrix entry (ray, pixel) is the length of the ray's intersection
//! with that pixel cell, so a horizontal ray contributes 1.0 per pixel it
//! crosses. Rays are organized as `n_angles` uniformly spaced directions over
//! half a turn, each with `n_rays` parallel offsets spanning the image
//! diagonal; extreme offsets miss the square entirely and produce all-zero
//! rows, which are kept (samplers skip them, like real scanner data with
//! detector cells past the object).

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{GeneratedProblem, ProblemKind};
use crate::error::{Error, Result};
use crate::numerics::{fmt_f64, DenseMatrix, Vector};

/// Angle count used by the experiment configs when none is given.
pub const DEFAULT_N_ANGLES: usize = 36;

/// Default ray count per angle: enough parallel lines at roughly one-pixel
/// spacing to span the image diagonal.
pub fn default_n_rays(q: usize) -> usize {
    ((q as f64) * std::f64::consts::SQRT_2).ceil() as usize
}

// ── Phantom ─────────────────────────────────────────────────────────────

/// The classic ten-ellipse head phantom: intensity, semi-axes, center and
/// rotation (degrees) per ellipse, with the original high-contrast
/// intensities (outer shell 2.0, brain -0.98, features at +-0.01/0.02).
const ELLIPSES: [[f64; 6]; 10] = [
    // intensity, semi_x, semi_y, x0, y0, angle_deg
    [2.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.98, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.02, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.02, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.01, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.01, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.01, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.01, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.01, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.01, 0.023, 0.046, 0.06, -0.605, 0.0],
];

/// Summed ellipse intensities at a point of `[-1, 1]^2`, before clamping.
fn phantom_value(x: f64, y: f64) -> f64 {
    let mut v = 0.0;
    for e in &ELLIPSES {
        let [a, sx, sy, x0, y0, deg] = *e;
        let phi = deg.to_radians();
        let (dx, dy) = (x - x0, y - y0);
        let xr = dx * phi.cos() + dy * phi.sin();
        let yr = -dx * phi.sin() + dy * phi.cos();
        if (xr / sx).powi(2) + (yr / sy).powi(2) <= 1.0 {
            v += a;
        }
    }
    v
}

/// A `q x q` grayscale ground-truth image, row-major with row 0 on top.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomImage {
    q: usize,
    pixels: Vec<f64>,
}

impl PhantomImage {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.q + col]
    }

    /// The flattened image used as the planted solution of tomography
    /// systems.
    pub fn to_vector(&self) -> Vector {
        Vector::new(self.pixels.clone())
    }

    /// ASCII PGM (P2) export, intensity scaled so the brightest pixel maps
    /// to 255.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let max = self.pixels.iter().cloned().fold(0.0, f64::max);
        let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "P2")?;
        writeln!(w, "{} {}", self.q, self.q)?;
        writeln!(w, "255")?;
        for row in 0..self.q {
            let line: Vec<String> = (0..self.q)
                .map(|col| format!("{}", (self.pixel(row, col) * scale).round() as u32))
                .collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Full-precision CSV export, one image row per line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let m = DenseMatrix::from_fn(self.q, self.q, |i, j| self.pixel(i, j));
        write_matrix_csv(path, &m)
    }
}

/// Rasterizes the phantom on a `q x q` grid: each pixel takes the summed
/// intensity of the ellipses containing its center, clamped to be
/// nonnegative. Pixel centers live on `[-1, 1]^2`.
pub fn shepp_logan_phantom(q: usize) -> Result<PhantomImage> {
    if q < 8 {
        return Err(Error::InvalidParameter(format!(
            "phantom needs q >= 8, got {q}"
        )));
    }
    let h = 2.0 / q as f64;
    let mut pixels = Vec::with_capacity(q * q);
    for i in 0..q {
        let y = 1.0 - (i as f64 + 0.5) * h;
        for j in 0..q {
            let x = -1.0 + (j as f64 + 0.5) * h;
            pixels.push(phantom_value(x, y).max(0.0));
        }
    }
    Ok(PhantomImage { q, pixels })
}

// ── Ray tracing ─────────────────────────────────────────────────────────

/// Intersection lengths of the line `origin + t * dir` with the unit cells
/// of the `[0, q]^2 grid`, as (pixel index, length) pairs in traversal
/// order. Pixel index is `row * q + col` with the grid y-axis pointing down
/// (row 0 on top), matching [`PhantomImage`] flattening.
fn trace_ray(q: usize, origin: [f64; 2], dir: [f64; 2]) -> Vec<(usize, f64)> {
    let qf = q as f64;

    // Clip to the image square (slab test per axis).
    let mut t_in = f64::NEG_INFINITY;
    let mut t_out = f64::INFINITY;
    for ax in 0..2 {
        if dir[ax] == 0.0 {
            if origin[ax] <= 0.0 || origin[ax] >= qf {
                return Vec::new();
            }
        } else {
            let a = (0.0 - origin[ax]) / dir[ax];
            let b = (qf - origin[ax]) / dir[ax];
            t_in = t_in.max(a.min(b));
            t_out = t_out.min(a.max(b));
        }
    }
    if t_in >= t_out {
        return Vec::new();
    }

    let entry = [origin[0] + t_in * dir[0], origin[1] + t_in * dir[1]];
    let cell = |v: f64| (v.floor() as i64).clamp(0, q as i64 - 1);
    let mut ix = cell(entry[0]);
    let mut iy = cell(entry[1]);

    // Per-axis: t of the next grid-line crossing and t per full cell.
    let axis = |d: f64, e: f64, c: i64| -> (i64, f64, f64) {
        if d > 0.0 {
            (1, t_in + ((c + 1) as f64 - e) / d, 1.0 / d)
        } else if d < 0.0 {
            (-1, t_in + (c as f64 - e) / d, -1.0 / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_x, mut t_next_x, dt_x) = axis(dir[0], entry[0], ix);
    let (step_y, mut t_next_y, dt_y) = axis(dir[1], entry[1], iy);

    let mut out = Vec::new();
    let mut t = t_in;
    let eps = 1e-12 * qf.max(1.0);
    loop {
        let t_stop = t_next_x.min(t_next_y).min(t_out);
        let len = t_stop - t;
        if len > 1e-12 {
            out.push(((iy as usize) * q + ix as usize, len));
        }
        if t_stop >= t_out - eps {
            break;
        }
        if t_next_x <= t_next_y {
            ix += step_x;
            t_next_x += dt_x;
        } else {
            iy += step_y;
            t_next_y += dt_y;
        }
        if ix < 0 || ix >= q as i64 || iy < 0 || iy >= q as i64 {
            break;
        }
        t = t_stop;
    }
    out
}

/// Builds the parallel-beam system for the `q x q` phantom: one matrix row
/// per (angle, offset) ray, `b = A * vec(phantom)`, planted solution the
/// phantom itself. Angles are uniform over half a turn; offsets are evenly
/// spaced across the image diagonal (so extreme rays graze the corners).
pub fn gen_parallel_tomo(q: usize, n_angles: usize, n_rays: usize) -> Result<GeneratedProblem> {
    if q < 8 {
        return Err(Error::InvalidParameter(format!(
            "tomography needs q >= 8, got {q}"
        )));
    }
    if n_angles == 0 || n_rays == 0 {
        return Err(Error::InvalidParameter(
            "n_angles and n_rays must be positive".into(),
        ));
    }

    let phantom = shepp_logan_phantom(q)?;
    let x_star = phantom.to_vector();
    let qf = q as f64;
    let center = qf / 2.0;
    let half_span = qf * std::f64::consts::SQRT_2 / 2.0;

    let mut a = DenseMatrix::zeros(n_angles * n_rays, q * q);
    for ti in 0..n_angles {
        let theta = ti as f64 * std::f64::consts::PI / n_angles as f64;
        let dir = [theta.cos(), theta.sin()];
        let perp = [-theta.sin(), theta.cos()];
        for ri in 0..n_rays {
            let s = if n_rays == 1 {
                0.0
            } else {
                -half_span + 2.0 * half_span * ri as f64 / (n_rays - 1) as f64
            };
            let origin = [center + s * perp[0], center + s * perp[1]];
            let row = ti * n_rays + ri;
            for (idx, len) in trace_ray(q, origin, dir) {
                a.set(row, idx, a.get(row, idx) + len);
            }
        }
    }

    let zero_rows = (0..a.rows())
        .filter(|&i| a.row(i).iter().all(|&v| v == 0.0))
        .count();
    let b = a.matvec(&x_star)?;

    let mut metadata = BTreeMap::new();
    metadata.insert("q".into(), q.to_string());
    metadata.insert("n_angles".into(), n_angles.to_string());
    metadata.insert("n_rays".into(), n_rays.to_string());
    metadata.insert("zero_rows".into(), zero_rows.to_string());

    Ok(GeneratedProblem {
        a,
        b,
        x_star: Some(x_star),
        kind: ProblemKind::ParallelTomo,
        metadata,
    })
}

// ── Image utilities ─────────────────────────────────────────────────────

/// Elementwise reconstruction error `|X_star - X_hat| / ||X_star||_F`,
/// reshaped to the image grid.
pub fn image_error_map(x_star: &PhantomImage, x_hat: &[f64]) -> Result<DenseMatrix> {
    let q = x_star.q;
    if x_hat.len() != q * q {
        return Err(Error::DimensionMismatch(format!(
            "reconstruction has {} entries, image needs {}",
            x_hat.len(),
            q * q
        )));
    }
    let fro = crate::numerics::norm2(&x_star.pixels);
    if fro == 0.0 {
        return Err(Error::DegenerateInput(
            "error map of an all-zero image".into(),
        ));
    }
    Ok(DenseMatrix::from_fn(q, q, |i, j| {
        (x_star.pixel(i, j) - x_hat[i * q + j]).abs() / fro
    }))
}

/// Writes any dense matrix as full-precision CSV, one row per line. Used for
/// error maps and phantom dumps.
pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
