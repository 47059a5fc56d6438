//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//! `b"LBSCKPT\0"`, `u32` version, 16 ASCII bytes of config hash, `u32` tensor
//! count, then per tensor: `u32` name length, UTF-8 name, `u32` rows, `u32`
//! cols, `rows * cols` `f64` values.

use std::fs;
use std::path::Path;

use crate::diffnum::{Matrix, ParamTensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LBSCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub tensors: Vec<(String, Matrix)>,
}

impl Checkpoint {
    pub fn from_params<'a>(config_hash: &str, params: impl IntoIterator<Item = (String, &'a ParamTensor)>) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            tensors: params.into_iter().map(|(n, p)| (n, p.value.clone())).collect(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let hash = self.config_hash.as_bytes();
        if hash.len() != 16 {
            return Err(Error::Contract(format!("config hash must be 16 bytes, got {}", hash.len())));
        }
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(hash);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, m) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Load {
                offset: 0,
                message: "not a checkpoint (bad magic)".into(),
            });
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Load {
                offset: 8,
                message: format!("unsupported checkpoint version {version}"),
            });
        }
        let hash_at = r.pos;
        let config_hash = String::from_utf8(r.take(16)?.to_vec()).map_err(|_| Error::Load {
            offset: hash_at as u64,
            message: "config hash is not UTF-8".into(),
        })?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let at = r.pos;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Load {
                offset: at as u64,
                message: "tensor name is not UTF-8".into(),
            })?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(rows * cols * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push((name, Matrix::from_vec(rows, cols, data)));
        }
        if r.pos != bytes.len() {
            return Err(Error::Load {
                offset: r.pos as u64,
                message: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Ok(Self { config_hash, tensors })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    /// Copies tensors into `params`, which must match by name and shape.
    pub fn restore<'a>(&self, params: impl IntoIterator<Item = (String, &'a mut ParamTensor)>) -> Result<()> {
        let params: Vec<_> = params.into_iter().collect();
        if params.len() != self.tensors.len() {
            return Err(Error::Contract(format!(
                "checkpoint has {} tensors, model has {}",
                self.tensors.len(),
                params.len()
            )));
        }
        for ((name, p), (cname, m)) in params.into_iter().zip(&self.tensors) {
            if &name != cname || p.value.shape() != m.shape() {
                return Err(Error::Contract(format!(
                    "checkpoint tensor {cname} {:?} does not match {name} {:?}",
                    m.shape(),
                    p.value.shape()
                )));
            }
            p.value = m.clone();
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Load {
            offset: self.pos as u64,
            message: format!("truncated: wanted {n} bytes, {} left", self.bytes.len() - self.pos),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
