//! Binary wave-function snapshots.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "QCOL1\n"            6 bytes magic
//! u32 N                particle count
//! u32 M                points per axis
//! f64 box_length
//! f64 time
//! M^N × (f64 re, f64 im), row-major, particle-1 axis slowest
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::SnapshotError;
use crate::grid::Grid;
use crate::wavefunction::WaveFunction;

pub const MAGIC: &[u8; 6] = b"QCOL1\n";

pub fn write_snapshot<W: Write>(psi: &WaveFunction, mut out: W) -> Result<(), SnapshotError> {
    let grid = psi.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(grid.particles() as u32).to_le_bytes())?;
    out.write_all(&(grid.points() as u32).to_le_bytes())?;
    out.write_all(&grid.box_length().to_le_bytes())?;
    out.write_all(&psi.time().to_le_bytes())?;
    for c in psi.amplitudes() {
        out.write_all(&c.re.to_le_bytes())?;
        out.write_all(&c.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<WaveFunction, SnapshotError> {
    let mut magic = [0u8; 6];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let particles = read_u32(&mut input)? as usize;
    let points = read_u32(&mut input)? as usize;
    let box_length = read_f64(&mut input)?;
    let time = read_f64(&mut input)?;
    let grid = Grid::new(particles, points, box_length)?;
    let mut amplitudes = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(&mut input)?;
        let im = read_f64(&mut input)?;
        amplitudes.push(Complex64::new(re, im));
    }
    Ok(WaveFunction::new(grid, amplitudes, time)?)
}

pub fn save_snapshot(psi: &WaveFunction, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
    write_snapshot(psi, BufWriter::new(File::create(path)?))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<WaveFunction, SnapshotError> {
    read_snapshot(BufReader::new(File::open(path)?))
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
