//! The `TFLD` binary field format.
//!
//! Layout (little-endian): magic `TFLD`, `u32` version = 1, `u32` N, `u64`
//! payload length in bytes, then `N^2` `f64` physical samples, row-major.
//! The space-time variant inserts `u32` frame count, `f64` t0 and `f64` dt
//! after the payload length and stores the frames back to back.

use super::field::TorusField;
use crate::error::{Error, Result};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"TFLD";
pub const VERSION: u32 = 1;

pub(crate) fn write_samples(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub(crate) fn read_samples(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated payload".into()))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub(crate) fn read_header(r: &mut impl Read) -> Result<(usize, u64)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = read_u32(r)? as usize;
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Format(format!(
            "grid size {n} is not a power of two"
        )));
    }
    let len = read_u64(r)?;
    Ok((n, len))
}

pub(crate) fn write_header(w: &mut impl Write, n: usize, payload: u64) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&payload.to_le_bytes())?;
    Ok(())
}

/// Writes the physical samples of `f`.
pub fn write_field(w: &mut impl Write, f: &TorusField) -> Result<()> {
    let n = f.n();
    write_header(w, n, (n * n * 8) as u64)?;
    write_samples(w, &f.to_physical())
}

/// Reads a single field and returns it with the raw samples, which
/// round-trip bit-exactly through [`write_samples`].
pub fn read_field(r: &mut impl Read) -> Result<(TorusField, Vec<f64>)> {
    let (n, len) = read_header(r)?;
    if len != (n * n * 8) as u64 {
        return Err(Error::Format(format!(
            "payload length {len} does not match N={n}"
        )));
    }
    let vals = read_samples(r, n * n)?;
    Ok((TorusField::from_physical(n, &vals)?, vals))
}

/// Writes raw physical samples as a `TFLD` field.
pub fn write_physical(w: &mut impl Write, n: usize, values: &[f64]) -> Result<()> {
    if values.len() != n * n {
        return Err(Error::Invalid("sample count does not match N".into()));
    }
    write_header(w, n, (n * n * 8) as u64)?;
    write_samples(w, values)
}
