//! Versioned binary model checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "GSCKPT01"
//! n_joints u32, filters u32, n_classes u32
//! spec_hash u64        hash of the canonical spec string
//! n_tensors u32
//! per tensor: name_len u16, name bytes, ndim u8, dims u32 * ndim,
//!             data f64 * prod(dims)
//! adam flag u8; when 1: step u64, then moment tensors m and v
//!             (data only, shapes mirror the parameters)
//! ```
//!
//! Loading recomputes the spec hash from the stored fields and rejects the
//! file on mismatch, so a checkpoint can never be applied to a different
//! architecture.

use super::{AdamState, Model, ModelSpec, Parameters, Tensor};
use crate::error::{GaitError, Result};
use crate::pose::atomic_write;
use std::path::Path;

const MAGIC: &[u8; 8] = b"GSCKPT01";

/// A loaded checkpoint: the model and, when saved, optimizer state.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub adam: Option<AdamState>,
}

fn err(msg: impl Into<String>) -> GaitError {
    GaitError::Checkpoint(msg.into())
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn tensor(&mut self, name: &str, t: &Tensor) {
        self.u16(name.len() as u16);
        self.buf.extend_from_slice(name.as_bytes());
        self.u8(t.shape.len() as u8);
        for &d in &t.shape {
            self.u32(d as u32);
        }
        for v in &t.data {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(err("truncated checkpoint"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let name_len = self.u16()? as usize;
        let name = std::str::from_utf8(self.take(name_len)?)
            .map_err(|_| err("bad tensor name"))?
            .to_string();
        let ndim = self.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(self.f64()?);
        }
        Ok((name, Tensor { shape, data }))
    }
}

/// Serializes a model (and optionally its Adam state) to `path`
/// atomically. Identical models produce byte-identical files.
pub fn save_checkpoint(path: &Path, model: &Model, adam: Option<&AdamState>) -> Result<()> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u32(model.spec.n_joints as u32);
    w.u32(model.spec.filters as u32);
    w.u32(model.spec.n_classes as u32);
    w.u64(model.spec.spec_hash());

    let names = model.spec.tensor_shapes();
    w.u32(names.len() as u32);
    for ((name, _), tensor) in names.iter().zip(&model.params.tensors) {
        w.tensor(name, tensor);
    }

    match adam {
        Some(state) => {
            w.u8(1);
            w.u64(state.step);
            for ((name, _), t) in names.iter().zip(&state.m) {
                w.tensor(name, t);
            }
            for ((name, _), t) in names.iter().zip(&state.v) {
                w.tensor(name, t);
            }
        }
        None => w.u8(0),
    }

    atomic_write(path, &w.buf)
}

/// Loads and verifies a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(err("not a checkpoint file (bad magic)"));
    }
    let spec = ModelSpec {
        n_joints: r.u32()? as usize,
        filters: r.u32()? as usize,
        n_classes: r.u32()? as usize,
    };
    let stored_hash = r.u64()?;
    if stored_hash != spec.spec_hash() {
        return Err(err(format!(
            "spec hash mismatch: file has {:#018x}, spec '{}' hashes to {:#018x}",
            stored_hash,
            spec.canonical(),
            spec.spec_hash()
        )));
    }

    let expected = spec.tensor_shapes();
    let n_tensors = r.u32()? as usize;
    if n_tensors != expected.len() {
        return Err(err(format!(
            "expected {} tensors, file has {}",
            expected.len(),
            n_tensors
        )));
    }
    let mut tensors = Vec::with_capacity(n_tensors);
    for (name, shape) in &expected {
        let (got_name, tensor) = r.tensor()?;
        if got_name != *name || tensor.shape != *shape {
            return Err(err(format!(
                "tensor mismatch: expected {} {:?}, got {} {:?}",
                name, shape, got_name, tensor.shape
            )));
        }
        tensors.push(tensor);
    }
    let model = Model {
        spec,
        params: Parameters { tensors },
    };

    let adam = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let mut read_moments = || -> Result<Vec<Tensor>> {
                expected
                    .iter()
                    .map(|(name, shape)| {
                        let (got_name, tensor) = r.tensor()?;
                        if got_name != *name || tensor.shape != *shape {
                            return Err(err("optimizer tensor mismatch"));
                        }
                        Ok(tensor)
                    })
                    .collect()
            };
            let m = read_moments()?;
            let v = read_moments()?;
            Some(AdamState { step, m, v })
        }
        other => return Err(err(format!("bad adam flag {}", other))),
    };

    Ok(Checkpoint { model, adam })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{adam_step, Gradients};

    #[test]
    fn round_trip_without_adam() {
        let model = Model::init(ModelSpec::new(6, 4), 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &model, None).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.model, model);
        assert!(ck.adam.is_none());
    }

    #[test]
    fn round_trip_with_adam() {
        let mut model = Model::init(ModelSpec::new(6, 4), 10);
        let mut state = AdamState::new(&model.spec);
        let mut grads = Gradients::zeros(&model.spec);
        grads.tensors[0].data[0] = 0.5;
        adam_step(&mut model.params, &grads, &mut state, 1e-3);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &model, Some(&state)).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.model, model);
        assert_eq!(ck.adam.unwrap(), state);
    }

    #[test]
    fn identical_saves_are_byte_identical() {
        let model = Model::init(ModelSpec::new(24, 8), 3);
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        save_checkpoint(&a, &model, None).unwrap();
        save_checkpoint(&b, &model, None).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn corrupted_hash_is_rejected() {
        let model = Model::init(ModelSpec::new(6, 4), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &model, None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[21] ^= 0xff; // inside the stored spec hash
        std::fs::write(&path, bytes).unwrap();
        match load_checkpoint(&path) {
            Err(GaitError::Checkpoint(msg)) => assert!(msg.contains("hash mismatch")),
            other => panic!("expected checkpoint error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let model = Model::init(ModelSpec::new(6, 4), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &model, None).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
