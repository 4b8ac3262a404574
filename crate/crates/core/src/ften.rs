//! FTEN v1: a minimal binary tensor interchange format.
//!
//! Layout (all integers little-endian):
//! - magic bytes `46 54 45 4E` ("FTEN")
//! - version byte `0x01`
//! - dtype byte `0x01` (float32)
//! - ndim byte, then `ndim` u32 dimensions
//! - row-major float32 payload
//!
//! Feature tensors are stored with ndim = 3 as `(grid_h, grid_w, dim)`.
//! Round trips are bit-exact.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::shuffler::{FeatureTensor, ShapeError};

pub const FTEN_MAGIC: [u8; 4] = *b"FTEN";
pub const FTEN_VERSION: u8 = 0x01;
pub const FTEN_DTYPE_F32: u8 = 0x01;

#[derive(Debug, Error)]
pub enum FtenError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0:#04x}")]
    BadVersion(u8),
    #[error("unsupported dtype {0:#04x}")]
    BadDtype(u8),
    #[error("dimension product overflows")]
    Overflow,
    #[error("invalid tensor shape: {0}")]
    Shape(#[from] ShapeError),
    #[error("expected 3 dimensions, found {0}")]
    WrongRank(usize),
}

/// Write raw dims + values in FTEN v1 form.
pub fn write_raw<W: Write>(mut w: W, dims: &[u32], values: &[f32]) -> Result<(), FtenError> {
    let expected: usize = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or(FtenError::Overflow)?;
    debug_assert_eq!(expected, values.len());
    w.write_all(&FTEN_MAGIC)?;
    w.write_all(&[FTEN_VERSION, FTEN_DTYPE_F32, dims.len() as u8])?;
    for &d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Read raw dims + values from FTEN v1 form.
pub fn read_raw<R: Read>(mut r: R) -> Result<(Vec<u32>, Vec<f32>), FtenError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != FTEN_MAGIC {
        return Err(FtenError::BadMagic(magic));
    }
    let mut head = [0u8; 3];
    r.read_exact(&mut head)?;
    let [version, dtype, ndim] = head;
    if version != FTEN_VERSION {
        return Err(FtenError::BadVersion(version));
    }
    if dtype != FTEN_DTYPE_F32 {
        return Err(FtenError::BadDtype(dtype));
    }
    let mut dims = Vec::with_capacity(ndim as usize);
    let mut dim_buf = [0u8; 4];
    for _ in 0..ndim {
        r.read_exact(&mut dim_buf)?;
        dims.push(u32::from_le_bytes(dim_buf));
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or(FtenError::Overflow)?;
    let mut payload = vec![0u8; count * 4];
    r.read_exact(&mut payload)?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((dims, values))
}

/// Write a feature tensor as `(grid_h, grid_w, dim)`.
pub fn write_tensor<W: Write>(w: W, t: &FeatureTensor) -> Result<(), FtenError> {
    write_raw(
        w,
        &[t.grid_h as u32, t.grid_w as u32, t.dim as u32],
        t.values(),
    )
}

/// Read a feature tensor; the file must have exactly three dimensions.
pub fn read_tensor<R: Read>(r: R) -> Result<FeatureTensor, FtenError> {
    let (dims, values) = read_raw(r)?;
    if dims.len() != 3 {
        return Err(FtenError::WrongRank(dims.len()));
    }
    Ok(FeatureTensor::new(
        dims[0] as usize,
        dims[1] as usize,
        dims[2] as usize,
        values,
    )?)
}

pub fn write_tensor_file(path: impl AsRef<Path>, t: &FeatureTensor) -> Result<(), FtenError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<FeatureTensor, FtenError> {
    read_tensor(BufReader::new(File::open(path)?))
}
