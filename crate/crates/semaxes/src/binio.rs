//! Binary dumps used for pipeline checkpointing.
//!
//! Values are little-endian 64-bit floats in row-major order behind a small
//! header, so a checkpointed stage reloads bit-for-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ica::IcaResult;

const MATRIX_MAGIC: &[u8; 4] = b"MTX1";
const ICA_MAGIC: &[u8; 4] = b"ICR1";

fn write_u32(out: &mut impl Write, v: u32, path: &Path) -> Result<()> {
    out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))
}

fn write_u64(out: &mut impl Write, v: u64, path: &Path) -> Result<()> {
    out.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    input.read_exact(buf).map_err(|e| Error::io(path, e))
}

fn read_u32(input: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, path)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(input: &mut impl Read, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b, path)?;
    Ok(u64::from_le_bytes(b))
}

fn write_rows(out: &mut impl Write, m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(m.ncols() * 8);
    for i in 0..m.nrows() {
        buf.clear();
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
        out.write_all(&buf).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn read_rows(input: &mut impl Read, rows: usize, cols: usize, path: &Path) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows, cols);
    let mut buf = vec![0u8; cols * 8];
    for i in 0..rows {
        read_exact(input, &mut buf, path)?;
        for j in 0..cols {
            m[(i, j)] = f64::from_le_bytes(buf[j * 8..j * 8 + 8].try_into().unwrap());
        }
    }
    Ok(m)
}

/// Writes a plain matrix dump (`MTX1` header, rows, cols, row-major data).
pub fn write_matrix(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(MATRIX_MAGIC).map_err(|e| Error::io(path, e))?;
    write_u64(&mut out, m.nrows() as u64, path)?;
    write_u64(&mut out, m.ncols() as u64, path)?;
    write_rows(&mut out, m, path)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a matrix dump written by [`write_matrix`].
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic, path)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::malformed(path, 0, "not a matrix dump"));
    }
    let rows = read_u64(&mut input, path)? as usize;
    let cols = read_u64(&mut input, path)? as usize;
    read_rows(&mut input, rows, cols, path)
}

/// Writes one ICA run (`ICR1` header with d_w, n, seed, convergence info,
/// then the mixing matrix and component matrix).
pub fn write_ica_result(result: &IcaResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(ICA_MAGIC).map_err(|e| Error::io(path, e))?;
    let a = result.mixing();
    let s = result.components();
    write_u32(&mut out, a.nrows() as u32, path)?;
    write_u32(&mut out, s.nrows() as u32, path)?;
    write_u64(&mut out, s.ncols() as u64, path)?;
    write_u64(&mut out, result.seed(), path)?;
    write_u32(&mut out, u32::from(result.converged()), path)?;
    write_u32(&mut out, result.iterations() as u32, path)?;
    write_rows(&mut out, a, path)?;
    write_rows(&mut out, s, path)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads an ICA run written by [`write_ica_result`].
pub fn read_ica_result(path: &Path) -> Result<IcaResult> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic, path)?;
    if &magic != ICA_MAGIC {
        return Err(Error::malformed(path, 0, "not an ICA run dump"));
    }
    let d = read_u32(&mut input, path)? as usize;
    let d_w = read_u32(&mut input, path)? as usize;
    let n = read_u64(&mut input, path)? as usize;
    let seed = read_u64(&mut input, path)?;
    let converged = read_u32(&mut input, path)? != 0;
    let iterations = read_u32(&mut input, path)? as usize;
    let a = read_rows(&mut input, d, d_w, path)?;
    let s = read_rows(&mut input, d_w, n, path)?;
    Ok(IcaResult::from_parts(a, s, seed, converged, iterations))
}

const WHITENING_MAGIC: &[u8; 4] = b"WHT1";

fn write_sized(out: &mut impl Write, m: &DMatrix<f64>, path: &Path) -> Result<()> {
    write_u64(out, m.nrows() as u64, path)?;
    write_u64(out, m.ncols() as u64, path)?;
    write_rows(out, m, path)
}

fn read_sized(input: &mut impl Read, path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_u64(input, path)? as usize;
    let cols = read_u64(input, path)? as usize;
    read_rows(input, rows, cols, path)
}

/// Writes a whitening checkpoint (`WHT1`: z, whitening map, dewhitening map,
/// mean, each with its own shape header).
pub fn write_whitening(w: &crate::ica::WhitenedData, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(WHITENING_MAGIC).map_err(|e| Error::io(path, e))?;
    write_sized(&mut out, w.z(), path)?;
    write_sized(&mut out, w.whitening_map(), path)?;
    write_sized(&mut out, w.dewhitening_map(), path)?;
    let mean = DMatrix::from_column_slice(w.mean().len(), 1, w.mean().as_slice());
    write_sized(&mut out, &mean, path)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a whitening checkpoint written by [`write_whitening`].
pub fn read_whitening(path: &Path) -> Result<crate::ica::WhitenedData> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic, path)?;
    if &magic != WHITENING_MAGIC {
        return Err(Error::malformed(path, 0, "not a whitening checkpoint"));
    }
    let z = read_sized(&mut input, path)?;
    let wm = read_sized(&mut input, path)?;
    let dm = read_sized(&mut input, path)?;
    let mean = read_sized(&mut input, path)?;
    let mean = nalgebra::DVector::from_column_slice(mean.as_slice());
    Ok(crate::ica::WhitenedData::from_parts(z, wm, dm, mean))
}
