//! Field serialization: two-column CSV and a little-endian binary block.
//!
//! Binary layout: magic `DPF1`, `N` as `u64`, `L` as `f64`, then `N` samples
//! as `f64`, all little-endian.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

pub const MAGIC: &[u8; 4] = b"DPF1";
pub const HEADER_BYTES: usize = 20;

/// Exponent form with 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with the given header and one row per entry of `columns[0]`.
pub fn csv_table(header: &[&str], columns: &[&[f64]]) -> String {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..rows {
        for (j, col) in columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_f64(col[i]));
        }
        out.push('\n');
    }
    out
}

pub fn field_to_csv(f: &Field) -> String {
    csv_table(&["x", "value"], &[&f.grid().points(), f.values()])
}

pub fn write_field_csv(f: &Field, w: &mut impl Write) -> Result<()> {
    w.write_all(field_to_csv(f).as_bytes())?;
    Ok(())
}

/// Parse a `x,value` CSV; the grid is recovered from the sample count and
/// the first abscissa `x_0 = −L`.
pub fn read_field_csv(r: &mut impl Read) -> Result<Field> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(str::trim) {
        Some("x,value") => {}
        other => return Err(Error::Format(format!("expected header `x,value`, got {other:?}"))),
    }
    let mut xs = Vec::new();
    let mut vals = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut parts = line.split(',');
        let mut next = || -> Result<f64> {
            parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("bad row {}: `{line}`", i + 2)))
        };
        xs.push(next()?);
        vals.push(next()?);
    }
    let first = *xs.first().ok_or_else(|| Error::Format("no data rows".into()))?;
    let grid = Grid::new(-first, vals.len())?;
    let tol = 1e-9 * grid.half_length();
    if let Some(j) = (0..xs.len()).find(|&j| (xs[j] - grid.point(j)).abs() > tol) {
        return Err(Error::Format(format!(
            "abscissa {} at row {} is not on the grid (expected {})",
            xs[j],
            j + 2,
            grid.point(j)
        )));
    }
    Field::new(&grid, vals)
}

pub fn field_to_bytes(f: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * f.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(f.len() as u64).to_le_bytes());
    out.extend_from_slice(&f.grid().half_length().to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_field_binary(f: &Field, w: &mut impl Write) -> Result<()> {
    w.write_all(&field_to_bytes(f))?;
    Ok(())
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let l = f64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_BYTES..];
    let n = usize::try_from(n).map_err(|_| Error::Format(format!("sample count {n} too large")))?;
    if body.len() != n.saturating_mul(8) {
        return Err(Error::Format(format!(
            "header announces {n} samples but {} payload bytes follow",
            body.len()
        )));
    }
    let grid = Grid::new(l, n)?;
    let vals = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Field::new(&grid, vals)
}

pub fn read_field_binary(r: &mut impl Read) -> Result<Field> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    field_from_bytes(&bytes)
}
