//! Single-file parameter archive: an 8-byte magic, the manifest length as a
//! little-endian `u64`, a TOML manifest (configuration and array table), then
//! the arrays as raw little-endian `f64`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Parameters, Potential, PotentialConfig, PotentialError};
use crate::autodiff::Tensor;

pub const MAGIC: &[u8; 8] = b"BSCTCKP1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    config: PotentialConfig,
    arrays: Vec<ArrayEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the data section, in values.
    offset: usize,
}

fn corrupt(msg: impl Into<String>) -> PotentialError {
    PotentialError::Checkpoint(msg.into())
}

pub fn to_bytes(p: &Potential) -> Vec<u8> {
    let mut arrays = Vec::new();
    let mut offset = 0;
    for (name, t) in &p.params.tensors {
        arrays.push(ArrayEntry { name: name.clone(), shape: t.shape().to_vec(), offset });
        offset += t.numel();
    }
    let manifest = toml::to_string(&Manifest { config: p.config.clone(), arrays }).expect("manifest serializes");
    let mut out = Vec::with_capacity(16 + manifest.len() + offset * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for t in p.params.tensors.values() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Potential, PotentialError> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("not a parameter archive (bad magic)"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let text = bytes.get(16..16 + len).ok_or_else(|| corrupt("truncated manifest"))?;
    let text = std::str::from_utf8(text).map_err(|_| corrupt("manifest is not utf-8"))?;
    let manifest: Manifest = toml::from_str(text).map_err(|e| corrupt(format!("manifest: {e}")))?;
    let data = &bytes[16 + len..];
    if data.len() % 8 != 0 {
        return Err(corrupt("data section is not a whole number of f64 values"));
    }
    let values: Vec<f64> =
        data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let mut tensors = BTreeMap::new();
    for a in manifest.arrays {
        let n: usize = a.shape.iter().product();
        let chunk = values
            .get(a.offset..a.offset + n)
            .ok_or_else(|| corrupt(format!("array '{}' runs past the data section", a.name)))?;
        tensors.insert(a.name, Tensor::new(a.shape, chunk.to_vec())?);
    }
    Potential::from_parts(manifest.config, Parameters { tensors })
}

pub fn save(p: &Potential, path: &Path) -> Result<(), PotentialError> {
    std::fs::write(path, to_bytes(p)).map_err(|source| PotentialError::Io { path: path.to_path_buf(), source })
}

pub fn load(path: &Path) -> Result<Potential, PotentialError> {
    let bytes = std::fs::read(path).map_err(|source| PotentialError::Io { path: path.to_path_buf(), source })?;
    from_bytes(&bytes)
}
