//! Binary field and trajectory dumps, and the CSV row formats of the
//! experiment tables.
//!
//! Field dump (version 1), little-endian throughout:
//!
//! ```text
//! magic "ZKCF" | u32 version | f64 xi_max | u32 n_x1 | u32 k_max
//! row-major (xi-major) coefficient pairs: f64 re, f64 im
//! ```
//!
//! Trajectory dump (version 2): the same header followed by a time axis
//! `u32 n_times | f64 dt`, then the frames in time order, each row-major.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::solver::{SolveMeta, Trajectory};
use crate::spectrum::{FrequencyGrid, SpectralField, SpectrumError};

pub const MAGIC: &[u8; 4] = b"ZKCF";
pub const VERSION_FIELD: u32 = 1;
pub const VERSION_TRAJECTORY: u32 = 2;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic (not a field dump)")]
    BadMagic,
    #[error("unsupported dump version {0}")]
    BadVersion(u32),
    #[error("corrupt dump: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Grid(#[from] SpectrumError),
}

fn write_header<W: Write>(w: &mut W, version: u32, grid: &FrequencyGrid) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&grid.xi_max().to_le_bytes())?;
    w.write_all(&(grid.n_x1() as u32).to_le_bytes())?;
    w.write_all(&(grid.k_max() as u32).to_le_bytes())?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<(u32, FrequencyGrid), IoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(IoError::BadMagic);
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION_FIELD && version != VERSION_TRAJECTORY {
        return Err(IoError::BadVersion(version));
    }
    r.read_exact(&mut b8)?;
    let xi_max = f64::from_le_bytes(b8);
    r.read_exact(&mut b4)?;
    let n_x1 = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let k_max = u32::from_le_bytes(b4) as usize;
    Ok((version, FrequencyGrid::new(xi_max, n_x1, k_max)?))
}

fn write_frame<W: Write>(w: &mut W, f: &SpectralField) -> io::Result<()> {
    for z in f.coeffs().iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_frame<R: Read>(r: &mut R, grid: &FrequencyGrid) -> Result<SpectralField, IoError> {
    let mut f = SpectralField::zeros(grid);
    let mut b8 = [0u8; 8];
    for j in 0..grid.n_x1() {
        for c in 0..grid.n_cols() {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            f.coeffs_mut()[(j, c)] = Complex64::new(re, im);
        }
    }
    Ok(f)
}

pub fn write_field<W: Write>(w: &mut W, f: &SpectralField) -> io::Result<()> {
    write_header(w, VERSION_FIELD, f.grid())?;
    write_frame(w, f)
}

pub fn read_field<R: Read>(r: &mut R) -> Result<SpectralField, IoError> {
    let (version, grid) = read_header(r)?;
    if version != VERSION_FIELD {
        return Err(IoError::Corrupt(format!("expected a field dump, found version {version}")));
    }
    read_frame(r, &grid)
}

pub fn write_trajectory<W: Write>(w: &mut W, t: &Trajectory) -> io::Result<()> {
    write_header(w, VERSION_TRAJECTORY, t.grid())?;
    w.write_all(&(t.states.len() as u32).to_le_bytes())?;
    w.write_all(&t.dt.to_le_bytes())?;
    for st in &t.states {
        write_frame(w, st)?;
    }
    Ok(())
}

pub fn read_trajectory<R: Read>(r: &mut R) -> Result<Trajectory, IoError> {
    let (version, grid) = read_header(r)?;
    if version != VERSION_TRAJECTORY {
        return Err(IoError::Corrupt(format!(
            "expected a trajectory dump, found version {version}"
        )));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let n_times = u32::from_le_bytes(b4) as usize;
    if n_times == 0 {
        return Err(IoError::Corrupt("empty trajectory".into()));
    }
    r.read_exact(&mut b8)?;
    let dt = f64::from_le_bytes(b8);
    let mut states = Vec::with_capacity(n_times);
    for _ in 0..n_times {
        states.push(read_frame(r, &grid)?);
    }
    Ok(Trajectory {
        dt,
        states,
        meta: SolveMeta {
            method: "loaded".into(),
            iterations: 0,
            tolerance: 0.0,
            increments: vec![],
        },
    })
}

/// CSV export of the coefficients: `xi,n2,re,im` per cell.
pub fn write_field_csv<W: Write>(w: &mut W, f: &SpectralField) -> io::Result<()> {
    writeln!(w, "xi,n2,re,im")?;
    let grid = f.grid();
    for j in 0..grid.n_x1() {
        for c in 0..grid.n_cols() {
            let z = f.at(j, c);
            writeln!(w, "{},{},{},{}", grid.xi(j), grid.mode_n(c), z.re, z.im)?;
        }
    }
    Ok(())
}
