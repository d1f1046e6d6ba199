//! Binary checkpoint format.
//!
//! ```text
//! "MNX1" | manifest length (u32 LE) | manifest JSON | f32 LE data
//! ```
//!
//! The manifest lists every layer with its shape, byte offset relative to
//! the start of the data section, and element count. Data follows in
//! registry order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::{ModelParams, VariantConfig};
use crate::tensor::{Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"MNX1";
pub const DTYPE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: [usize; 3],
    pub offset: usize,
    pub count: usize,
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantConfig>,
    pub tensors: Vec<ManifestEntry>,
}

pub fn to_bytes(params: &ModelParams<f32>, variant: Option<&VariantConfig>) -> Result<Vec<u8>> {
    let mut tensors = Vec::with_capacity(params.num_layers());
    let mut offset = 0;
    for (name, t) in params.iter() {
        tensors.push(ManifestEntry {
            name: name.to_string(),
            shape: t.shape().as_array(),
            offset,
            count: t.len(),
            dtype: DTYPE.into(),
        });
        offset += 4 * t.len();
    }
    let manifest = Manifest {
        variant: variant.copied(),
        tensors,
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Checkpoint("manifest too large".into()))?;
    let mut out = Vec::with_capacity(8 + json.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in params.iter() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<(ModelParams<f32>, Manifest)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("missing MNX1 magic"));
    }
    let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let json = bytes.get(8..8 + len).ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest =
        serde_json::from_slice(json).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
    let data = &bytes[8 + len..];
    let mut entries = Vec::with_capacity(manifest.tensors.len());
    for e in &manifest.tensors {
        if e.dtype != DTYPE {
            return Err(Error::Checkpoint(format!("layer '{}' has dtype {}", e.name, e.dtype)));
        }
        let shape = Shape::new(e.shape[0], e.shape[1], e.shape[2]);
        if shape.len() != e.count {
            return Err(Error::Checkpoint(format!(
                "layer '{}' count {} does not match shape {shape}",
                e.name, e.count
            )));
        }
        let raw = data
            .get(e.offset..e.offset + 4 * e.count)
            .ok_or_else(|| Error::Checkpoint(format!("layer '{}' data truncated", e.name)))?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        entries.push((e.name.clone(), Tensor::from_shape_vec(shape, values)?));
    }
    Ok((ModelParams::from_entries(entries)?, manifest))
}

pub fn save(path: impl AsRef<Path>, params: &ModelParams<f32>, variant: Option<&VariantConfig>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, to_bytes(params, variant)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<(ModelParams<f32>, Manifest)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Loads weights and checks them against `cfg`.
pub fn load_for(path: impl AsRef<Path>, cfg: &VariantConfig) -> Result<ModelParams<f32>> {
    let (params, _) = load(path)?;
    params.validate_against(cfg)?;
    Ok(params)
}
