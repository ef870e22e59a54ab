//! Dependency-free raw video container.
//!
//! Layout: ASCII `VRAW1`, then `T`, `C`, `H`, `W` as little-endian `u32`,
//! then `T·C·H·W` little-endian `f32` intensities in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const RAW_MAGIC: &[u8; 5] = b"VRAW1";
const HEADER_LEN: usize = 5 + 4 * 4;

pub fn encode_raw(frames: &Tensor) -> Result<Vec<u8>> {
    let [t, c, h, w] = *frames.shape() else {
        return Err(Error::Shape(format!("raw video needs T×C×H×W, got {:?}", frames.shape())));
    };
    let mut out = Vec::with_capacity(HEADER_LEN + frames.len() * 4);
    out.extend_from_slice(RAW_MAGIC);
    for d in [t, c, h, w] {
        let d = u32::try_from(d).map_err(|_| Error::Shape(format!("extent {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in frames.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raw(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < HEADER_LEN || &bytes[..5] != RAW_MAGIC {
        return Err(Error::Data("not a VRAW1 file".into()));
    }
    let dim = |i: usize| {
        let at = 5 + 4 * i;
        u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize
    };
    let shape = vec![dim(0), dim(1), dim(2), dim(3)];
    let n: usize = shape.iter().product();
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n * 4 {
        return Err(Error::Data(format!(
            "raw payload has {} bytes, header {shape:?} needs {}",
            payload.len(),
            n * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    Tensor::new(shape, data)
}

pub fn read_raw(path: &Path) -> Result<Tensor> {
    decode_raw(&fs::read(path)?).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn write_raw(path: &Path, frames: &Tensor) -> Result<()> {
    fs::write(path, encode_raw(frames)?)?;
    Ok(())
}
