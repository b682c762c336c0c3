//! Artifact emission: CSV with lossless floats, pretty JSON reports.
//!
//! Everything written here must be byte-identical across runs with the same
//! inputs: floats are printed with 17 significant digits, JSON object keys
//! serialize in sorted order, and no wall-clock data enters any file.

use std::fs;
use std::path::Path;

use parinv::field::{QTrajectory, StateField};
use parinv::grid::{SpatialGrid, TimeGrid};
use parinv::{Error, Result};

/// Full round-trip formatting: 1 + 16 = 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write one CSV file. Cells are preformatted; empty strings are legal and
/// mean "metric unavailable".
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + 64);
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Rows of `t, q_1..q_s` over the trajectory's levels.
pub fn write_trajectory_csv(path: &Path, tg: &TimeGrid, q: &QTrajectory) -> Result<()> {
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=q.s()).map(|i| format!("q_{i}")));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (q.first_level()..=q.last_level())
        .map(|n| {
            let mut row = vec![fmt_f64(tg.t(n))];
            row.extend((0..q.s()).map(|i| fmt_f64(q.get(i, n))));
            row
        })
        .collect();
    write_csv(path, &header_refs, &rows)
}

/// Rows of `t, psi_1..psi_s`; `psi` is laid out `[j*levels + n]`.
pub fn write_psi_csv(path: &Path, tg: &TimeGrid, psi: &[f64], s: usize) -> Result<()> {
    let levels = tg.num_levels();
    assert_eq!(psi.len(), s * levels);
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=s).map(|j| format!("psi_{j}")));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (0..levels)
        .map(|n| {
            let mut row = vec![fmt_f64(tg.t(n))];
            row.extend((0..s).map(|j| fmt_f64(psi[j * levels + n])));
            row
        })
        .collect();
    write_csv(path, &header_refs, &rows)
}

/// Rows of `x[, y], u` for one time level.
pub fn write_state_csv(path: &Path, grid: &SpatialGrid, values: &[f64]) -> Result<()> {
    let header: &[&str] = if grid.dim() == 2 {
        &["x", "y", "u"]
    } else {
        &["x", "u"]
    };
    let rows: Vec<Vec<String>> = (0..grid.num_nodes())
        .map(|idx| {
            let (x, y) = grid.coords(idx);
            let mut row = vec![fmt_f64(x)];
            if let Some(y) = y {
                row.push(fmt_f64(y));
            }
            row.push(fmt_f64(values[idx]));
            row
        })
        .collect();
    write_csv(path, header, &rows)
}

/// Rows of `t, x[, y], u` over every level of the field.
pub fn write_full_state_csv(
    path: &Path,
    grid: &SpatialGrid,
    tg: &TimeGrid,
    u: &StateField,
) -> Result<()> {
    let header: &[&str] = if grid.dim() == 2 {
        &["t", "x", "y", "u"]
    } else {
        &["t", "x", "u"]
    };
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(u.num_levels() * grid.num_nodes());
    for n in u.first_level()..=u.last_level() {
        let level = u.level(n);
        for idx in 0..grid.num_nodes() {
            let (x, y) = grid.coords(idx);
            let mut row = vec![fmt_f64(tg.t(n)), fmt_f64(x)];
            if let Some(y) = y {
                row.push(fmt_f64(y));
            }
            row.push(fmt_f64(level[idx]));
            rows.push(row);
        }
    }
    write_csv(path, header, &rows)
}

/// Pretty JSON plus trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
