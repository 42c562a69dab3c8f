//! Kernel persistence. Binary layout (little-endian):
//! `"QKAD"`, version `u16`, rows `u32`, cols `u32`, stage `u8`, then
//! `rows * cols` row-major `f64` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{KernelMatrix, Stage};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const QKAD_MAGIC: &[u8; 4] = b"QKAD";
pub const QKAD_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 1;

pub fn encode_qkad(k: &KernelMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * k.matrix.data().len());
    out.extend_from_slice(QKAD_MAGIC);
    out.extend_from_slice(&QKAD_VERSION.to_le_bytes());
    out.extend_from_slice(&(k.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(k.cols() as u32).to_le_bytes());
    out.push(k.stage.code());
    for v in k.matrix.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes the matrix and stage; provenance is not part of the format.
pub fn decode_qkad(bytes: &[u8]) -> Result<(Matrix, Stage)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != QKAD_MAGIC {
        return Err(Error::InvalidKernelFile("missing QKAD header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != QKAD_VERSION {
        return Err(Error::InvalidKernelFile(format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let stage = Stage::from_code(bytes[14])?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != rows * cols * 8 {
        return Err(Error::InvalidKernelFile(format!(
            "expected {} payload bytes, found {}",
            rows * cols * 8,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((Matrix::from_vec(rows, cols, data)?, stage))
}

pub fn write_qkad(path: &Path, k: &KernelMatrix) -> Result<()> {
    fs::write(path, encode_qkad(k))?;
    Ok(())
}

pub fn read_qkad(path: &Path) -> Result<(Matrix, Stage)> {
    decode_qkad(&fs::read(path)?)
}

/// Plain CSV dump, one kernel row per line, for inspection.
pub fn write_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}
