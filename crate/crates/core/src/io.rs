//! Binary snapshots of grids and field states, little-endian throughout.
//!
//! Grid dump: 32-byte header (`NWGRID01`, n as u64, h, R_out) followed by the
//! node classes as row-major f64 codes.
//!
//! Field dump: `NWFLD001`, then M and n as u64, t and dt as f64, then for each
//! component the three stored levels (oldest first), each row-major.

use std::io::{Read, Write};

use crate::fields::{FieldError, FieldState};
use crate::geometry::ExteriorGrid;

pub const GRID_MAGIC: &[u8; 8] = b"NWGRID01";
pub const FIELD_MAGIC: &[u8; 8] = b"NWFLD001";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}, expected {expected:?}")]
    Magic { found: String, expected: &'static str },
    #[error("snapshot is for an n = {found} grid, this grid has n = {expected}")]
    Grid { found: usize, expected: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub n: usize,
    pub h: f64,
    pub r_out: f64,
}

fn put_f64s(w: &mut dyn Write, v: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
    let mut buf = Vec::new();
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

fn get_u64(r: &mut dyn Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut dyn Read) -> std::io::Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

fn get_f64s(r: &mut dyn Read, count: usize) -> std::io::Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn expect_magic(r: &mut dyn Read, magic: &'static [u8; 8]) -> Result<(), IoError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(IoError::Magic {
            found: String::from_utf8_lossy(&b).into_owned(),
            expected: std::str::from_utf8(magic).expect("ascii"),
        });
    }
    Ok(())
}

pub fn write_grid(grid: &ExteriorGrid, w: &mut dyn Write) -> std::io::Result<()> {
    w.write_all(GRID_MAGIC)?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    put_f64s(w, [grid.h(), grid.r_out()])?;
    put_f64s(w, grid.kinds().iter().map(|k| *k as u8 as f64))
}

/// Header and node-class codes of a grid dump.
pub fn read_grid(r: &mut dyn Read) -> Result<(GridHeader, Vec<f64>), IoError> {
    expect_magic(r, GRID_MAGIC)?;
    let n = get_u64(r)? as usize;
    let header = GridHeader {
        n,
        h: get_f64(r)?,
        r_out: get_f64(r)?,
    };
    let codes = get_f64s(r, n * n)?;
    Ok((header, codes))
}

pub fn write_field(state: &FieldState, grid: &ExteriorGrid, w: &mut dyn Write) -> std::io::Result<()> {
    let m = state.components();
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&(m as u64).to_le_bytes())?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    put_f64s(w, [state.t(), state.dt()])?;
    for c in 0..m {
        for level in [state.history(), state.prev(), state.curr()] {
            put_f64s(w, level.iter().skip(c).step_by(m).copied())?;
        }
    }
    Ok(())
}

pub fn read_field(grid: &ExteriorGrid, r: &mut dyn Read) -> Result<FieldState, IoError> {
    expect_magic(r, FIELD_MAGIC)?;
    let m = get_u64(r)? as usize;
    let n = get_u64(r)? as usize;
    if n != grid.n() {
        return Err(IoError::Grid {
            found: n,
            expected: grid.n(),
        });
    }
    let (t, dt) = (get_f64(r)?, get_f64(r)?);
    let len = grid.len();
    let mut levels = vec![vec![0.0; len * m]; 3];
    for c in 0..m {
        for level in levels.iter_mut() {
            for (node, v) in get_f64s(r, len)?.into_iter().enumerate() {
                level[node * m + c] = v;
            }
        }
    }
    let curr = levels.pop().expect("three levels");
    let prev = levels.pop().expect("three levels");
    let history = levels.pop().expect("three levels");
    Ok(FieldState::from_levels(grid, m, t, dt, history, prev, curr)?)
}
