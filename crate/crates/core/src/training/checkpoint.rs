//! Checkpoint container.
//!
//! ```text
//! "ANDT"  u32 version
//! u32 header length, UTF-8 JSON header (configs, history, optimizer step, metadata)
//! u32 tensor count, then per tensor:
//!     u32 name length, name, u8 dtype (0 = f64, 1 = f32), u32 rank, u32 dims…, payload
//! u32 CRC32 of every preceding byte
//! ```
//!
//! All integers and payloads are little-endian. Parameters are stored as
//! `f32` only when every value is exactly representable, so a round trip is
//! always bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{param_shapes, ModelConfig, ModelParams, Weights};
use crate::numerics::ops::RunningStats;
use crate::numerics::Tensor;
use crate::training::{OptimizerState, Precision, TrainConfig, TrainHistory, Trainer};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ANDT";
pub const CHECKPOINT_VERSION: u32 = 1;

const DTYPE_F64: u8 = 0;
const DTYPE_F32: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub history: TrainHistory,
    /// Free-form provenance, e.g. the resolved run configuration.
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn from_trainer(t: &Trainer, metadata: serde_json::Value) -> Self {
        Self {
            model: t.model.clone(),
            train: t.train.clone(),
            params: t.params.clone(),
            optimizer: t.optimizer.clone(),
            history: t.history.clone(),
            metadata,
        }
    }

    pub fn into_trainer(self) -> Trainer {
        Trainer {
            model: self.model,
            train: self.train,
            params: self.params,
            optimizer: self.optimizer,
            history: self.history,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    train: TrainConfig,
    history: TrainHistory,
    optimizer_step: u64,
    metadata: serde_json::Value,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("value {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor, allow_f32: bool) -> Result<()> {
    put_u32(out, name.len())?;
    out.extend_from_slice(name.as_bytes());
    let f32_exact = allow_f32 && t.data().iter().all(|&v| (v as f32 as f64).to_bits() == v.to_bits());
    out.push(if f32_exact { DTYPE_F32 } else { DTYPE_F64 });
    put_u32(out, t.rank())?;
    for &d in t.shape() {
        put_u32(out, d)?;
    }
    for &v in t.data() {
        if f32_exact {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        } else {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(())
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let header = Header {
        model: ckpt.model.clone(),
        train: ckpt.train.clone(),
        history: ckpt.history.clone(),
        optimizer_step: ckpt.optimizer.step,
        metadata: ckpt.metadata.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let f32_params = ckpt.train.precision == Precision::F32;

    let mut tensors: Vec<(String, &Tensor, bool)> = Vec::new();
    for (name, t) in ckpt.params.weights.entries() {
        tensors.push((format!("param.{name}"), t, f32_params));
    }
    let running: Vec<(Tensor, Tensor)> = ckpt
        .params
        .running
        .iter()
        .map(|r| Ok((Tensor::from_vec(r.mean.clone())?, Tensor::from_vec(r.var.clone())?)))
        .collect::<Result<_>>()?;
    for (i, (m, v)) in running.iter().enumerate() {
        tensors.push((format!("running.{i}.mean"), m, false));
        tensors.push((format!("running.{i}.var"), v, false));
    }
    for (name, t) in ckpt.optimizer.m.entries() {
        tensors.push((format!("adam.m.{name}"), t, false));
    }
    for (name, t) in ckpt.optimizer.v.entries() {
        tensors.push((format!("adam.v.{name}"), t, false));
    }

    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_u32(&mut out, json.len())?;
    out.extend_from_slice(&json);
    put_u32(&mut out, tensors.len())?;
    for (name, t, f32_ok) in tensors {
        put_tensor(&mut out, &name, t, f32_ok)?;
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Truncated(format!("needed {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

struct RawTensor<'a> {
    name: &'a [u8],
    dtype: u8,
    shape: Vec<usize>,
    payload: &'a [u8],
}

impl RawTensor<'_> {
    fn decode(&self) -> Result<(String, Tensor)> {
        let name = String::from_utf8(self.name.to_vec()).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let data = match self.dtype {
            DTYPE_F64 => self.payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect(),
            DTYPE_F32 => self
                .payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect(),
            d => return Err(Error::Format(format!("tensor {name}: unknown dtype {d}"))),
        };
        let t = Tensor::new(self.shape.clone(), data).map_err(|e| Error::Format(format!("tensor {name}: {e}")))?;
        Ok((name, t))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| Error::Format("not a checkpoint file".into()))? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let version = r.u32()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }

    // framing first, so a flipped payload byte surfaces as a checksum error
    let json_len = r.u32()?;
    let json = r.take(json_len)?;
    let count = r.u32()?;
    let mut raw = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let name_len = r.u32()?;
        let name = r.take(name_len)?;
        let dtype = r.take(1)?[0];
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let width = if dtype == DTYPE_F32 { 4 } else { 8 };
        let n = shape
            .iter()
            .try_fold(width, |acc: usize, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        let payload = r.take(n)?;
        raw.push(RawTensor { name, dtype, shape, payload });
    }
    let body_end = r.pos;
    let stored = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after checksum", bytes.len() - r.pos)));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let header: Header = serde_json::from_slice(json)?;
    let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
    for rt in &raw {
        let (name, t) = rt.decode()?;
        if tensors.insert(name.clone(), t).is_some() {
            return Err(Error::Format(format!("duplicate tensor {name}")));
        }
    }

    let shapes = param_shapes(&header.model).map_err(|e| Error::Format(format!("stored model config: {e}")))?;
    let mut take = |name: String, shape: &[usize]| -> Result<Tensor> {
        let t = tensors.remove(&name).ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
        if t.shape() != shape {
            return Err(Error::Format(format!("tensor {name} is {:?}, expected {shape:?}", t.shape())));
        }
        Ok(t)
    };
    let weights: Weights<Tensor> = shapes.try_map(|n, s| take(format!("param.{n}"), s))?;
    let m = shapes.try_map(|n, s| take(format!("adam.m.{n}"), s))?;
    let v = shapes.try_map(|n, s| take(format!("adam.v.{n}"), s))?;
    let mut running = Vec::new();
    for (i, st) in shapes.stages.iter().enumerate() {
        running.push(RunningStats {
            mean: take(format!("running.{i}.mean"), &st.bn_gamma)?.into_data(),
            var: take(format!("running.{i}.var"), &st.bn_gamma)?.into_data(),
        });
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::Format(format!("unexpected tensor {extra}")));
    }
    Ok(Checkpoint {
        model: header.model,
        train: header.train,
        params: ModelParams { weights, running },
        optimizer: OptimizerState {
            m,
            v,
            step: header.optimizer_step,
        },
        history: header.history,
        metadata: header.metadata,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(precision: Precision) -> Checkpoint {
        let model = ModelConfig::tiny();
        let train = TrainConfig { precision, ..TrainConfig::default() };
        let mut t = Trainer::new(model, train).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for w in t.optimizer.m.values_mut() {
            *w = Tensor::randn(w.shape().to_vec(), &mut rng).unwrap();
        }
        t.optimizer.step = 17;
        t.params.running[0].mean[1] = 0.25;
        t.history.epoch_loss = vec![0.5, 0.25];
        Checkpoint::from_trainer(&t, serde_json::json!({"note": "x"}))
    }

    #[test]
    fn round_trip_is_exact() {
        for p in [Precision::F64, Precision::F32] {
            let c = sample(p);
            let bytes = encode_checkpoint(&c).unwrap();
            assert_eq!(&bytes[..4], b"ANDT");
            let back = decode_checkpoint(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn f32_storage_is_smaller() {
        let a = encode_checkpoint(&sample(Precision::F64)).unwrap().len();
        let b = encode_checkpoint(&sample(Precision::F32)).unwrap().len();
        assert!(b < a);
    }

    #[test]
    fn corrupted_byte_fails_checksum() {
        let clean = encode_checkpoint(&sample(Precision::F64)).unwrap();
        // last tensor payload, and a byte inside the JSON header
        for at in [clean.len() - 6, 20] {
            let mut bytes = clean.clone();
            bytes[at] ^= 0x40;
            assert!(matches!(decode_checkpoint(&bytes), Err(Error::Checksum { .. })), "offset {at}");
        }
    }

    #[test]
    fn newer_version_rejected() {
        let mut bytes = encode_checkpoint(&sample(Precision::F64)).unwrap();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Version { found: 2, supported: 1 })));
    }

    #[test]
    fn truncation_detected() {
        let bytes = encode_checkpoint(&sample(Precision::F64)).unwrap();
        for cut in [5, 13, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(Error::Truncated(_))), "cut {cut}");
        }
        assert!(matches!(decode_checkpoint(b"NOPE"), Err(Error::Format(_))));
    }
}
