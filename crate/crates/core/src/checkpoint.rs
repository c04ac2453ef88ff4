//! Checkpoint container: a versioned binary file holding the network spec,
//! auxiliary metadata, and the flat parameter vector, ending in a checksum.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! bytes 0..8    magic "UNCPCKPT"
//! bytes 8..12   format version (u32, currently 1)
//! bytes 12..16  header length (u32)
//! ...           header JSON: {"spec": MlpSpec, "meta": CheckpointMeta}
//! 8 bytes       parameter count (u64)
//! 8 * n bytes   parameters (f64)
//! 8 bytes       FNV-1a 64 checksum of every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Mlp, MlpSpec};

const MAGIC: &[u8; 8] = b"UNCPCKPT";
const VERSION: u32 = 1;

/// Auxiliary training metadata stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Expected input image shape.
    pub input_height: usize,
    pub input_width: usize,
    /// Label standardization applied during downstream regression training;
    /// predictions de-standardize with `y = label_mean + label_std * y'`.
    #[serde(default = "zero")]
    pub label_mean: f64,
    #[serde(default = "one")]
    pub label_std: f64,
    /// Epochs actually trained.
    #[serde(default)]
    pub epochs: usize,
    /// Final training loss, for provenance.
    #[serde(default)]
    pub final_train_nll: f64,
}

fn zero() -> f64 {
    0.0
}

fn one() -> f64 {
    1.0
}

impl CheckpointMeta {
    pub fn for_input(height: usize, width: usize) -> Self {
        Self {
            input_height: height,
            input_width: width,
            label_mean: 0.0,
            label_std: 1.0,
            epochs: 0,
            final_train_nll: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    spec: MlpSpec,
    meta: CheckpointMeta,
}

/// A trained model ready to serialize or run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub spec: MlpSpec,
    pub meta: CheckpointMeta,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(model: &Mlp, meta: CheckpointMeta) -> Self {
        Self {
            spec: model.spec().clone(),
            meta,
            params: model.params().to_vec(),
        }
    }

    /// Instantiate the stored network.
    pub fn model(&self) -> Result<Mlp> {
        Mlp::from_params(self.spec.clone(), self.params.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            spec: self.spec.clone(),
            meta: self.meta.clone(),
        })?;
        let mut out = Vec::with_capacity(32 + header.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let sum = fnv1a64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |why: &str| Error::Checkpoint(why.to_string());
        if bytes.len() < 28 {
            return Err(fail("file truncated"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8-byte tail"));
        if fnv1a64(body) != stored {
            return Err(fail("checksum mismatch"));
        }
        if &body[..8] != MAGIC {
            return Err(fail("bad magic"));
        }
        let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version}, expected {VERSION}"
            )));
        }
        let header_len = u32::from_le_bytes(body[12..16].try_into().unwrap()) as usize;
        let header_end = 16 + header_len;
        if body.len() < header_end + 8 {
            return Err(fail("file truncated"));
        }
        let header: Header = serde_json::from_slice(&body[16..header_end])?;
        let count =
            u64::from_le_bytes(body[header_end..header_end + 8].try_into().unwrap()) as usize;
        let params_start = header_end + 8;
        if body.len() != params_start + 8 * count {
            return Err(fail("parameter block length mismatch"));
        }
        let params: Vec<f64> = body[params_start..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            spec: header.spec,
            meta: header.meta,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Checksum of the serialized form, for run manifests.
    pub fn checksum(&self) -> Result<u64> {
        Ok(fnv1a64(&self.to_bytes()?))
    }
}

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
