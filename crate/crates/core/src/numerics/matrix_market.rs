//! Matrix Market and plain-text vector I/O.
//!
//! Supported Matrix Market flavours: `matrix array real general` (dense,
//! column-major values) and `matrix coordinate real general` (1-based sparse
//! triplets). Vectors use one value per line. All reals are written with 17
//! significant digits so files round-trip to the exact same doubles.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{fmt_f64, DenseMatrix, Vector};
use crate::error::{Error, Result};

const BANNER_ARRAY: &str = "%%MatrixMarket matrix array real general";
const BANNER_COORD: &str = "%%MatrixMarket matrix coordinate real general";

/// Writes a dense matrix in `array` format (column-major entries).
pub fn write_matrix_market_array(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{BANNER_ARRAY}")?;
    writeln!(w, "{} {}", m.rows(), m.cols())?;
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            writeln!(w, "{}", fmt_f64(m.get(i, j)))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a dense matrix in `coordinate` format, dropping exact zeros.
pub fn write_matrix_market_coordinate(path: &Path, m: &DenseMatrix) -> Result<()> {
    let nnz = m.as_slice().iter().filter(|&&x| x != 0.0).count();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{BANNER_COORD}")?;
    writeln!(w, "{} {} {}", m.rows(), m.cols(), nnz)?;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m.get(i, j);
            if v != 0.0 {
                writeln!(w, "{} {} {}", i + 1, j + 1, fmt_f64(v))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads either Matrix Market flavour into a dense matrix.
pub fn read_matrix_market(path: &Path) -> Result<DenseMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (_, banner) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let banner = banner?;
    let coordinate = if banner.trim() == BANNER_ARRAY {
        false
    } else if banner.trim() == BANNER_COORD {
        true
    } else {
        return Err(Error::parse(
            path,
            1,
            format!("unsupported header {banner:?}; expected real/general array or coordinate"),
        ));
    };

    // Skip comment lines, then read the size line.
    let mut size_line = None;
    for (idx, line) in lines.by_ref() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some((idx + 1, t.to_string()));
        break;
    }
    let (size_lineno, size_line) =
        size_line.ok_or_else(|| Error::parse(path, 2, "missing size line"))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::parse(path, size_lineno, format!("bad size token {t:?}")))
        })
        .collect::<Result<_>>()?;

    let expected_dims = if coordinate { 3 } else { 2 };
    if dims.len() != expected_dims {
        return Err(Error::parse(
            path,
            size_lineno,
            format!("expected {expected_dims} size fields, found {}", dims.len()),
        ));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let mut m = DenseMatrix::zeros(rows, cols);

    if coordinate {
        let nnz = dims[2];
        let mut seen = 0usize;
        for (idx, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let lineno = idx + 1;
            let mut parts = t.split_whitespace();
            let (i, j, v) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::parse(path, lineno, "expected `i j value`")),
            };
            let i: usize = i
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad row index {i:?}")))?;
            let j: usize = j
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad column index {j:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad value {v:?}")))?;
            if i == 0 || i > rows || j == 0 || j > cols {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("entry ({i},{j}) outside {rows}x{cols}"),
                ));
            }
            m.set(i - 1, j - 1, v);
            seen += 1;
        }
        if seen != nnz {
            return Err(Error::parse(
                path,
                size_lineno,
                format!("header promises {nnz} entries, file has {seen}"),
            ));
        }
    } else {
        let mut values = Vec::with_capacity(rows * cols);
        for (idx, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            for tok in t.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| {
                    Error::parse(path, idx + 1, format!("bad value {tok:?}"))
                })?;
                values.push(v);
            }
        }
        if values.len() != rows * cols {
            return Err(Error::parse(
                path,
                size_lineno,
                format!(
                    "array body has {} values, expected {}",
                    values.len(),
                    rows * cols
                ),
            ));
        }
        // Array format is column-major.
        let mut it = values.into_iter();
        for j in 0..cols {
            for i in 0..rows {
                m.set(i, j, it.next().unwrap());
            }
        }
    }
    Ok(m)
}

/// Writes a vector as one value per line.
pub fn write_vector_text(path: &Path, v: &Vector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for x in v.iter() {
        writeln!(w, "{}", fmt_f64(*x))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a one-value-per-line vector.
pub fn read_vector_text(path: &Path) -> Result<Vector> {
    let reader = BufReader::new(File::open(path)?);
    let mut data = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("bad value {t:?}")))?;
        data.push(v);
    }
    Ok(Vector::new(data))
}
