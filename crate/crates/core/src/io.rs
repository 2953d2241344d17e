//! Field and lattice serialization.
//!
//! CSV files carry one row per grid node (`x,y,value` or `x,y,ax,ay`) in
//! row-major order. The binary `MCF1` format stores one or more real layers on
//! a common grid:
//!
//! | bytes   | content                                   |
//! |---------|-------------------------------------------|
//! | 0..4    | magic `MCF1`                              |
//! | 4..8    | `nx` (u32)                                |
//! | 8..12   | `ny` (u32)                                |
//! | 12..16  | number of layers (u32)                    |
//! | 16..48  | `x_min, x_max, y_min, y_max` (f64)        |
//! | 48..    | layers, each `nx·ny` f64 in row-major order |
//!
//! Everything is little-endian. Masks are not stored.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::lattice::CellLattice;

pub const MCF1_MAGIC: &[u8; 4] = b"MCF1";
const HEADER_LEN: usize = 48;

pub fn write_scalar_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["x", "y", "value"]).map_err(csv_err)?;
    for (k, v) in field.values.iter().enumerate() {
        let p = field.grid.point(k);
        w.serialize((p[0], p[1], v)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector_csv(path: &Path, field: &VectorField) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["x", "y", "ax", "ay"]).map_err(csv_err)?;
    for (k, v) in field.values.iter().enumerate() {
        let p = field.grid.point(k);
        w.serialize((p[0], p[1], v[0], v[1])).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Format(format!("expected header {}, found {}", expected.join(","), headers.iter().collect::<Vec<_>>().join(","))));
    }
    r.deserialize::<Vec<f64>>().map(|row| row.map_err(csv_err)).collect()
}

/// Recovers the grid from row-major node coordinates.
fn grid_from_rows(rows: &[Vec<f64>]) -> Result<Grid> {
    if rows.len() < 4 {
        return Err(Error::Format("need at least 2×2 nodes".into()));
    }
    let y0 = rows[0][1];
    let nx = rows.iter().take_while(|r| r[1] == y0).count();
    if nx < 2 || rows.len() % nx != 0 {
        return Err(Error::Format("rows do not form a rectangular grid".into()));
    }
    let ny = rows.len() / nx;
    let h = rows[1][0] - rows[0][0];
    let grid = Grid::new(nx, ny, rows[0][0], y0, h);
    for (k, r) in rows.iter().enumerate() {
        let p = grid.point(k);
        if (p[0] - r[0]).abs() > 1e-9 * (1.0 + p[0].abs()) || (p[1] - r[1]).abs() > 1e-9 * (1.0 + p[1].abs()) {
            return Err(Error::Format(format!("row {k} is off the uniform grid")));
        }
    }
    Ok(grid)
}

pub fn read_scalar_csv(path: &Path) -> Result<ScalarField> {
    let rows = read_rows(path, &["x", "y", "value"])?;
    let grid = grid_from_rows(&rows)?;
    Ok(ScalarField::new(grid, rows.iter().map(|r| r[2]).collect(), vec![true; grid.len()]))
}

pub fn read_vector_csv(path: &Path) -> Result<VectorField> {
    let rows = read_rows(path, &["x", "y", "ax", "ay"])?;
    let grid = grid_from_rows(&rows)?;
    Ok(VectorField::new(grid, rows.iter().map(|r| [r[2], r[3]]).collect()))
}

pub fn write_lattice_csv(path: &Path, lattice: &CellLattice) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["m", "n", "cx", "cy"]).map_err(csv_err)?;
    for (idx, c) in lattice.indices.iter().zip(&lattice.centers) {
        w.serialize((idx[0], idx[1], c[0], c[1])).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes real layers sharing `grid` in the `MCF1` format.
pub fn write_mcf1(path: &Path, grid: &Grid, layers: &[&[f64]]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let bb = grid.bbox();
    w.write_all(MCF1_MAGIC)?;
    w.write_all(&(grid.nx as u32).to_le_bytes())?;
    w.write_all(&(grid.ny as u32).to_le_bytes())?;
    w.write_all(&(layers.len() as u32).to_le_bytes())?;
    for v in [bb.x_min, bb.x_max, bb.y_min, bb.y_max] {
        w.write_all(&v.to_le_bytes())?;
    }
    for layer in layers {
        if layer.len() != grid.len() {
            return Err(Error::Format("layer length does not match the grid".into()));
        }
        for v in *layer {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_mcf1(path: &Path) -> Result<(Grid, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN || &bytes[0..4] != MCF1_MAGIC {
        return Err(Error::Format("missing MCF1 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (nx, ny, nl) = (u32_at(4), u32_at(8), u32_at(12));
    let (x_min, x_max) = (f64_at(16), f64_at(24));
    let y_min = f64_at(32);
    if nx < 2 || ny < 2 {
        return Err(Error::Format("grid smaller than 2×2".into()));
    }
    let n = nx * ny;
    if bytes.len() != HEADER_LEN + 8 * n * nl {
        return Err(Error::Format(format!("expected {} data bytes, found {}", 8 * n * nl, bytes.len() - HEADER_LEN)));
    }
    let grid = Grid::new(nx, ny, x_min, y_min, (x_max - x_min) / (nx - 1) as f64);
    let layers = (0..nl).map(|l| (0..n).map(|k| f64_at(HEADER_LEN + 8 * (l * n + k))).collect()).collect();
    Ok((grid, layers))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
