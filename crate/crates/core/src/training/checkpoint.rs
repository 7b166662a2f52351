//! Binary checkpoint container.
//!
//! Layout: a 64-byte header (`magic[8]`, `version: u32`, `n_entries: u32`,
//! `config_len: u64`, `body_len: u64`, `sha256[32]` over config and body), a TOML text
//! section with the run metadata, then `n_entries` tensors, each
//! `name_len: u32, name, ndim: u32, dims: u32 * ndim, f32 * prod(dims)`. All integers and
//! floats are little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EpochRecord, SystemKind, TrainConfig};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 8] = b"NMMPCKPT";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

pub const PARAM_PREFIX: &str = "param/";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerMeta {
    pub group: String,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub system: SystemKind,
    /// Completed epochs.
    pub epoch: usize,
    /// Completed optimizer steps.
    pub step: u64,
    pub rng_seed: u64,
    /// Position of the training random stream, decimal.
    pub rng_word_pos: String,
    #[serde(default)]
    pub diverged: Option<String>,
    #[serde(default)]
    pub optimizers: Vec<OptimizerMeta>,
    #[serde(default)]
    pub history: Vec<EpochRecord>,
    pub config: TrainConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<(String, Matrix<f32>)>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<&Matrix<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// Model weights as a parameter store (names without the `param/` prefix).
    pub fn params(&self) -> ParamStore<f32> {
        let mut store = ParamStore::new();
        for (name, m) in &self.tensors {
            if let Some(n) = name.strip_prefix(PARAM_PREFIX) {
                store.add(n.to_string(), m.clone());
            }
        }
        store
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let config = toml::to_string(&self.meta).map_err(|e| Error::CorruptCheckpoint(format!("metadata: {e}")))?;
        let mut body = Vec::new();
        for (name, m) in &self.tensors {
            body.extend_from_slice(&(name.len() as u32).to_le_bytes());
            body.extend_from_slice(name.as_bytes());
            body.extend_from_slice(&2u32.to_le_bytes());
            body.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            body.extend_from_slice(&(m.cols() as u32).to_le_bytes());
            for v in m.data() {
                body.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut hasher = Sha256::new();
        hasher.update(config.as_bytes());
        hasher.update(&body);
        let digest = hasher.finalize();

        let mut out = Vec::with_capacity(HEADER_LEN + config.len() + body.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        out.extend_from_slice(&(config.len() as u64).to_le_bytes());
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&digest);
        debug_assert_eq!(out.len(), HEADER_LEN);
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(Error::CorruptCheckpoint("not a checkpoint file".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion { found: version, expected: FORMAT_VERSION });
        }
        let n_entries = u32_at(12) as usize;
        let config_len = u64_at(16) as usize;
        let body_len = u64_at(24) as usize;
        let digest = &bytes[32..64];
        if bytes.len() != HEADER_LEN.saturating_add(config_len).saturating_add(body_len) {
            return Err(Error::CorruptCheckpoint(format!(
                "length {} does not match header ({} + {config_len} + {body_len})",
                bytes.len(),
                HEADER_LEN
            )));
        }
        let config = &bytes[HEADER_LEN..HEADER_LEN + config_len];
        let body = &bytes[HEADER_LEN + config_len..];
        let mut hasher = Sha256::new();
        hasher.update(config);
        hasher.update(body);
        if hasher.finalize().as_slice() != digest {
            return Err(Error::Checksum);
        }
        let config =
            std::str::from_utf8(config).map_err(|_| Error::CorruptCheckpoint("metadata is not UTF-8".into()))?;
        let meta: CheckpointMeta =
            toml::from_str(config).map_err(|e| Error::CorruptCheckpoint(format!("metadata: {e}")))?;

        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= body.len())
                .ok_or_else(|| Error::CorruptCheckpoint("truncated tensor".into()))?;
            let s = &body[pos..end];
            pos = end;
            Ok(s)
        };
        let mut tensors = Vec::with_capacity(n_entries);
        for _ in 0..n_entries {
            let name_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(name_len)?.to_vec())
                .map_err(|_| Error::CorruptCheckpoint("tensor name is not UTF-8".into()))?;
            let ndim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
            }
            let (rows, cols) = match dims.as_slice() {
                [r, c] => (*r, *c),
                [n] => (1, *n),
                [] => (1, 1),
                _ => return Err(Error::CorruptCheckpoint(format!("tensor `{name}` has {ndim} dimensions"))),
            };
            let n = rows.checked_mul(cols).ok_or_else(|| Error::CorruptCheckpoint("tensor too large".into()))?;
            let raw = take(n.checked_mul(4).ok_or_else(|| Error::CorruptCheckpoint("tensor too large".into()))?)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push((name, Matrix::from_vec(rows, cols, data)));
        }
        if pos != body.len() {
            return Err(Error::CorruptCheckpoint("trailing bytes after tensors".into()));
        }
        Ok(Self { meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
