//! Binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      4 bytes  "PAXN"
//! version    u32
//! config     hidden_dim u32, num_layers u32, n_rbf u32, n_shbf u32, n_srbf u32,
//!            local_cutoff f64, global_cutoff f64, ablation u8,
//!            forward_blocks u32, fusion_blocks u32
//! metadata   epoch u32, best_val_loss f64, seed u64
//! params     tensor block
//! optimizer  u8 flag; when 1: step u64, lr f64, beta1 f64, beta2 f64, eps f64,
//!            first-moment tensor block, second-moment tensor block
//!
//! tensor block: u32 count, then per tensor
//!            name (u32 length + UTF-8), u32 rank, u32 dims, f64 values
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{param_layout, Ablation, ModelConfig};
use crate::tensor::{AdamConfig, AdamState, ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PAXN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingMeta {
    /// 1-based epoch the parameters come from; 0 before any training.
    pub epoch: usize,
    pub best_val_loss: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub optimizer: Option<AdamState>,
    pub meta: TrainingMeta,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tensors(out: &mut Vec<u8>, store: &ParamStore) {
    put_u32(out, store.len());
    for (name, t) in store.iter() {
        put_u32(out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(out, t.shape().len());
        for &d in t.shape() {
            put_u32(out, d);
        }
        for &v in t.data() {
            put_f64(out, v);
        }
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let c = &ckpt.config;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [c.hidden_dim, c.num_layers, c.n_rbf, c.n_shbf, c.n_srbf] {
        put_u32(&mut out, v);
    }
    put_f64(&mut out, c.local_cutoff);
    put_f64(&mut out, c.global_cutoff);
    out.push(c.ablation.code());
    put_u32(&mut out, c.forward_blocks);
    put_u32(&mut out, c.fusion_blocks);
    put_u32(&mut out, ckpt.meta.epoch);
    put_f64(&mut out, ckpt.meta.best_val_loss);
    out.extend_from_slice(&ckpt.meta.seed.to_le_bytes());
    put_tensors(&mut out, &ckpt.params);
    match &ckpt.optimizer {
        None => out.push(0),
        Some(state) => {
            out.push(1);
            out.extend_from_slice(&state.step.to_le_bytes());
            let a = state.config;
            for v in [a.learning_rate, a.beta1, a.beta2, a.eps] {
                put_f64(&mut out, v);
            }
            put_tensors(&mut out, &state.m);
            put_tensors(&mut out, &state.v);
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensors(&mut self) -> Result<ParamStore> {
        let count = self.u32()?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let len = self.u32()?;
            let name = std::str::from_utf8(self.take(len)?)
                .map_err(|_| corrupt("tensor name is not UTF-8"))?
                .to_string();
            let rank = self.u32()?;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(self.u32()?);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= self.buf.len() / 8)
                .ok_or_else(|| corrupt(format!("tensor {name} has implausible shape {shape:?}")))?;
            let bytes = self.take(n * 8)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| corrupt(e.to_string()))?;
            store
                .insert(name, t)
                .map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(store)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let (hidden_dim, num_layers, n_rbf, n_shbf, n_srbf) =
        (r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let (local_cutoff, global_cutoff) = (r.f64()?, r.f64()?);
    let code = r.u8()?;
    let ablation =
        Ablation::from_code(code).ok_or_else(|| corrupt(format!("unknown ablation code {code}")))?;
    let config = ModelConfig {
        hidden_dim,
        num_layers,
        n_rbf,
        n_shbf,
        n_srbf,
        local_cutoff,
        global_cutoff,
        ablation,
        forward_blocks: r.u32()?,
        fusion_blocks: r.u32()?,
    };
    config.validate().map_err(|e| corrupt(e.to_string()))?;
    let meta = TrainingMeta {
        epoch: r.u32()?,
        best_val_loss: r.f64()?,
        seed: r.u64()?,
    };
    let params = r.tensors()?;
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let config = AdamConfig {
                learning_rate: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                eps: r.f64()?,
            };
            let m = r.tensors()?;
            let v = r.tensors()?;
            params.check_aligned(&m).map_err(|e| corrupt(e.to_string()))?;
            params.check_aligned(&v).map_err(|e| corrupt(e.to_string()))?;
            Some(AdamState { config, step, m, v })
        }
        f => return Err(corrupt(format!("bad optimizer flag {f}"))),
    };
    if r.pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    check_params(&config, &params)?;
    Ok(Checkpoint {
        config,
        params,
        optimizer,
        meta,
    })
}

/// Every tensor the configuration implies must be present with its shape,
/// and nothing else.
pub fn check_params(config: &ModelConfig, params: &ParamStore) -> Result<()> {
    let layout = param_layout(config);
    for spec in &layout {
        let found = params.get(&spec.name).ok_or_else(|| Error::ShapeMismatch {
            name: spec.name.clone(),
            expected: spec.shape.clone(),
            found: Vec::new(),
        })?;
        if found.shape() != spec.shape.as_slice() {
            return Err(Error::ShapeMismatch {
                name: spec.name.clone(),
                expected: spec.shape.clone(),
                found: found.shape().to_vec(),
            });
        }
    }
    if params.len() != layout.len() {
        let extra = params
            .iter()
            .find(|(n, _)| !layout.iter().any(|s| s.name == *n))
            .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
            .unwrap_or_default();
        return Err(Error::ShapeMismatch {
            name: extra.0,
            expected: Vec::new(),
            found: extra.1,
        });
    }
    Ok(())
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint and requires its parameters to fit `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    check_params(expected, &ckpt.params)?;
    Ok(ckpt)
}
