//! Binary model checkpoints.
//!
//! Layout (little-endian):
//! `"DCAM"`, u16 version, u32 config length, config JSON,
//! u64 epoch, f64 best validation loss, f64 learning rate, u64 Adam step,
//! u64 batch-norm update count,
//! u32 tensor count, then per tensor: u32 rank, rank x u32 dims, f32 data.
//! Tensors are the parameters in declared order, each batch-norm layer's
//! running mean and variance, the Adam first moments, then second moments.

use std::path::Path;

use super::{NetConfig, Network};
use crate::error::{Error, Result};
use crate::nn::{AdamState, BatchNormState, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DCAM";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub struct ModelCheckpoint {
    pub net: Network<f32>,
    pub adam: AdamState<f32>,
    pub epoch: u64,
    pub best_val: f64,
    pub lr: f64,
}

impl ModelCheckpoint {
    /// A checkpoint of an untrained network with a fresh optimizer.
    pub fn fresh(net: Network<f32>, lr: f64) -> Self {
        let adam = AdamState::new(&net.params);
        ModelCheckpoint {
            net,
            adam,
            epoch: 0,
            best_val: f64::INFINITY,
            lr,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let cfg = serde_json::to_string(self.net.config())?;
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(cfg.as_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.best_val.to_le_bytes());
        out.extend_from_slice(&self.lr.to_le_bytes());
        out.extend_from_slice(&self.adam.step.to_le_bytes());
        let bn_updates = self.net.bn.first().map_or(0, |b| b.updates);
        out.extend_from_slice(&bn_updates.to_le_bytes());

        let stats: Vec<Tensor<f32>> = self
            .net
            .bn
            .iter()
            .flat_map(|b| {
                [
                    Tensor::vector(b.running_mean.clone()),
                    Tensor::vector(b.running_var.clone()),
                ]
            })
            .collect();
        let tensors: Vec<&Tensor<f32>> = self
            .net
            .params
            .iter()
            .chain(&stats)
            .chain(&self.adam.m)
            .chain(&self.adam.v)
            .collect();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&4u32.to_le_bytes());
            for d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u16("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let cfg_len = r.u32("config length")? as usize;
        let cfg_text = std::str::from_utf8(r.take(cfg_len, "config")?)
            .map_err(|e| Error::Malformed(format!("config text: {e}")))?;
        let cfg: NetConfig = serde_json::from_str(cfg_text)
            .map_err(|e| Error::Malformed(format!("config: {e}")))?;
        let epoch = r.u64("epoch")?;
        let best_val = f64::from_bits(r.u64("best validation loss")?);
        let lr = f64::from_bits(r.u64("learning rate")?);
        let step = r.u64("optimizer step")?;
        let bn_updates = r.u64("batch-norm update count")?;
        let count = r.u32("tensor count")? as usize;

        let template = Network::<f32>::new(cfg.clone(), 0)?;
        let (np, nb) = (template.params.len(), template.bn.len());
        if count != 3 * np + 2 * nb {
            return Err(Error::Malformed(format!(
                "expected {} tensors, header says {count}",
                3 * np + 2 * nb
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let rank = r.u32("tensor rank")?;
            if rank != 4 {
                return Err(Error::Malformed(format!("tensor rank {rank}")));
            }
            let mut shape = [0usize; 4];
            for d in &mut shape {
                *d = r.u32("tensor shape")? as usize;
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or(Error::Truncated("tensor data"))?, "tensor data")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(Tensor::new(shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Malformed(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        let mut it = tensors.into_iter();
        let params: Vec<Tensor<f32>> = it.by_ref().take(np).collect();
        let mut bn = Vec::with_capacity(nb);
        for _ in 0..nb {
            let mean = it.next().expect("counted").into_data();
            let var = it.next().expect("counted").into_data();
            bn.push(BatchNormState {
                running_mean: mean,
                running_var: var,
                momentum: cfg.bn_momentum,
                eps: cfg.bn_eps,
                updates: bn_updates,
            });
        }
        let m: Vec<Tensor<f32>> = it.by_ref().take(np).collect();
        let v: Vec<Tensor<f32>> = it.collect();
        for (a, b) in params.iter().zip(m.iter().zip(&v)) {
            if a.shape() != b.0.shape() || a.shape() != b.1.shape() {
                return Err(Error::Malformed("optimizer moment shape".into()));
            }
        }
        let net = Network::from_parts(cfg, params, bn)?;
        let mut adam = AdamState::new(&net.params);
        adam.step = step;
        adam.m = m;
        adam.v = v;
        Ok(ModelCheckpoint {
            net,
            adam,
            epoch,
            best_val,
            lr,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        if end > self.bytes.len() {
            return Err(Error::Truncated(what));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &ModelCheckpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelCheckpoint::from_bytes(&bytes)
}
