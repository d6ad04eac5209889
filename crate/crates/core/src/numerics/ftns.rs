//! `FTNS` raw tensor files: the magic `FTNS`, a little-endian `u32` rank,
//! `rank` little-endian `u64` extents, then the values as little-endian `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::tensor::RealTensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FTNS";

pub fn write_ftns<W: Write>(mut w: W, t: &RealTensor) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(t.rank() as u32).to_le_bytes())?;
    for &e in t.shape() {
        w.write_all(&(e as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.numel() * 8);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_ftns<R: Read>(mut r: R) -> Result<RealTensor> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_ftns(&bytes)
}

pub fn decode_ftns(bytes: &[u8]) -> Result<RealTensor> {
    let bad = |reason: &str| Error::format("FTNS", reason);
    let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| bad("missing magic"))?;
    let (rank_bytes, mut rest) = rest.split_at_checked(4).ok_or_else(|| bad("truncated rank"))?;
    let rank = u32::from_le_bytes(rank_bytes.try_into().expect("4 bytes")) as usize;
    if rank > 16 {
        return Err(bad(&format!("implausible rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let (e, tail) = rest.split_at_checked(8).ok_or_else(|| bad("truncated extents"))?;
        let extent = u64::from_le_bytes(e.try_into().expect("8 bytes"));
        shape.push(usize::try_from(extent).map_err(|_| bad("extent overflows usize"))?);
        rest = tail;
    }
    if shape.contains(&0) {
        return Err(bad("zero extent"));
    }
    let numel = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| bad("element count overflows"))?;
    if rest.len() != numel.checked_mul(8).ok_or_else(|| bad("payload size overflows"))? {
        return Err(bad(&format!("expected {} payload bytes, found {}", numel * 8, rest.len())));
    }
    let data = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    RealTensor::new(shape, data)
}

pub fn save_ftns(path: impl AsRef<Path>, t: &RealTensor) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_ftns(&mut buf, t)?;
    fs::write(path, buf).map_err(|e| Error::from(e).in_file(path))
}

pub fn load_ftns(path: impl AsRef<Path>) -> Result<RealTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    decode_ftns(&bytes).map_err(|e| e.in_file(path))
}
