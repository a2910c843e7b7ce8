//! Snapshot files and CSV tables.
//!
//! A snapshot is the magic `HPE1`, then little-endian `u32` values
//! `nx, ny, nz, ncomp`, then `ncomp * nx * ny * nz` little-endian `f64`
//! values in component-major, x, y, z-fastest order.

use std::io::{Read, Write};
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::spectral::{GridSpec, RealField};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"HPE1";

pub fn encode_snapshot(f: &RealField) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(20 + 8 * f.values().len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    for n in [g.nx(), g.ny(), g.nz(), f.components()] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<RealField> {
    if bytes.len() < 20 || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(Error::Format("not a snapshot (bad magic)".into()));
    }
    let word =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (nx, ny, nz, nc) = (word(0), word(1), word(2), word(3));
    let grid = GridSpec::new(nx, ny, nz).map_err(|e| Error::Format(e.to_string()))?;
    if nc == 0 {
        return Err(Error::Format("snapshot has no components".into()));
    }
    let count = nc * grid.len();
    if bytes.len() != 20 + 8 * count {
        return Err(Error::Format(format!(
            "snapshot payload is {} bytes, expected {}",
            bytes.len() - 20,
            8 * count
        )));
    }
    let values = bytes[20..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RealField::from_values(grid, nc, values)
}

pub fn write_snapshot(path: &Path, f: &RealField) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_snapshot(f))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<RealField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header plus one line per row; `None` cells are left empty.
pub fn csv_table<const N: usize>(
    header: &[&str; N],
    rows: impl IntoIterator<Item = [Option<f64>; N]>,
) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| c.map(format_float).unwrap_or_default())
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    csv_table(
        &DiagnosticsRecord::COLUMNS,
        records.iter().map(|r| r.values()),
    )
}

/// Header and rows of a parsed table.
pub type Table = (Vec<String>, Vec<Vec<Option<f64>>>);

/// Parses a table written by [`csv_table`].
pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format("empty table".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::Format(format!("row {}: bad number '{c}'", i + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "row {} has {} cells",
                i + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
