//! `NETTOP1` binary operator files.
//!
//! Layout: the 7-byte magic, then `m`, `n`, `r` as u64 LE, then `sigma_star`,
//! the `m x r` entries of U, the `r` singular values and the `r x n` entries of
//! Vt, all as f64 LE in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DenseMatrix, ForwardOperator};
use crate::error::{NettError, Result};

pub const OPERATOR_MAGIC: &[u8; 7] = b"NETTOP1";

pub fn write_operator<W: Write>(mut w: W, a: &ForwardOperator) -> Result<()> {
    w.write_all(OPERATOR_MAGIC)?;
    for v in [a.rows(), a.cols(), a.rank()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&a.sigma_star().to_le_bytes())?;
    for v in a
        .u()
        .as_slice()
        .iter()
        .chain(a.sigma())
        .chain(a.vt().as_slice())
    {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_operator<R: Read>(mut r: R) -> Result<ForwardOperator> {
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if &magic != OPERATOR_MAGIC {
        return Err(NettError::Format("missing NETTOP1 magic".into()));
    }
    let m = read_u64(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    let rank = read_u64(&mut r)? as usize;
    let sigma_star = read_f64(&mut r)?;
    let u = read_f64s(&mut r, m * rank)?;
    let sigma = read_f64s(&mut r, rank)?;
    let vt = read_f64s(&mut r, rank * n)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(NettError::Format("trailing bytes after operator".into()));
    }
    ForwardOperator::from_factors(
        DenseMatrix::from_row_major(m, rank, u)?,
        sigma,
        DenseMatrix::from_row_major(rank, n, vt)?,
        sigma_star,
    )
}

impl ForwardOperator {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_operator(BufWriter::new(File::create(path)?), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)
            .map_err(|_| NettError::MissingArtifact(format!("operator file {}", path.display())))?;
        read_operator(BufReader::new(file))
    }
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
