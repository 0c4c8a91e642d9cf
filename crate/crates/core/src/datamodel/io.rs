//! Binary feature files.
//!
//! Layout (little-endian): magic `LSG1`, `u32` version (1), `u32` rows,
//! `u32` columns, then `rows * columns` IEEE-754 `f32` values in row-major order.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::{FeatureSequence, Modality};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LSG1";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn load_feature_file(path: impl AsRef<Path>, modality: Modality) -> Result<FeatureSequence> {
    let data = read_feature_matrix(path)?;
    FeatureSequence::new(data, modality)
}

pub fn write_feature_file(path: impl AsRef<Path>, seq: &FeatureSequence) -> Result<()> {
    write_feature_matrix(path, seq.data())
}

/// Reads any matrix stored in the feature-file format, rejecting non-finite entries.
pub fn read_feature_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_feature_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(m)?).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode(m: &DMatrix<f64>) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.nrows()).map_err(|_| Error::Format("too many rows".into()))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| Error::Format("too many columns".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "file too short for header ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, expected LSG1".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    let expected = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() % 4 != 0 || payload.len() / 4 != expected {
        return Err(Error::Length {
            expected,
            found: payload.len() / 4,
        });
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        let (r, c) = (i / cols, i % cols);
        if !v.is_finite() {
            return Err(Error::NonFinite { row: r, col: c });
        }
        m[(r, c)] = v as f64;
    }
    Ok(m)
}
