// SPDX-License-Identifier: MIT OR Apache-2.0
//! `KPF1` field snapshots.
//!
//! Layout, all little-endian: magic `KPF1`, u32 version (=1), u32 d, u32 n per
//! axis, f64 L per axis, u8 origin_centered, f64 t, then the values row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField};

pub const MAGIC: &[u8; 4] = b"KPF1";
pub const VERSION: u32 = 1;

pub fn write_to<W: Write>(mut w: W, field: &ScalarField, t: f64) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for &n in grid.shape() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &l in grid.lengths() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&[grid.is_centered() as u8])?;
    w.write_all(&t.to_le_bytes())?;
    for &v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads a snapshot, returning the field and its time stamp.
pub fn read_from<R: Read>(mut r: R) -> Result<(ScalarField, f64)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let d = read_u32(&mut r)? as usize;
    if !(1..=crate::grid::MAX_DIM).contains(&d) {
        return Err(Error::Format(format!("dimension {d}")));
    }
    let n = (0..d)
        .map(|_| read_u32(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let lengths = (0..d)
        .map(|_| read_f64(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let centered = match flag[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("origin flag {other}"))),
    };
    let t = read_f64(&mut r)?;
    let grid = PeriodicGrid::new(d, &n, &lengths, centered)?;
    let mut raw = vec![0u8; grid.len() * 8];
    r.read_exact(&mut raw)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((ScalarField::new(grid, data)?, t))
}

pub fn write(path: &Path, field: &ScalarField, t: f64) -> Result<()> {
    write_to(BufWriter::new(File::create(path)?), field, t)
}

pub fn read(path: &Path) -> Result<(ScalarField, f64)> {
    read_from(BufReader::new(File::open(path)?))
}
