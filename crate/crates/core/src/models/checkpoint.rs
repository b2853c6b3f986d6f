//! Checkpoints: a JSON manifest next to a raw little-endian parameter blob.
//!
//! The manifest records the model spec, the element type, and for every
//! tensor its name, shape and byte offset into the blob. Tensors are stored
//! contiguously in manifest order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec};
use crate::autograd::{numel, Scalar, Tensor};
use crate::error::{Error, Result};

pub const FORMAT: &str = "bounce-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub dtype: String,
    pub spec: ModelSpec,
    /// Blob file name, relative to the manifest's directory.
    pub blob: String,
    pub tensors: Vec<TensorEntry>,
    /// Free-form provenance (training config, seed, epoch, ...).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Writes `model` to `path` (the manifest) and a sibling `.bin` blob.
pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path, metadata: serde_json::Value) -> Result<()> {
    let blob = blob_path(path);
    let mut bytes = Vec::with_capacity(model.param_count() * T::BYTES);
    let mut tensors = Vec::with_capacity(model.params.len());
    for (name, p) in model.names.iter().zip(&model.params) {
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: p.shape.clone(),
            offset: bytes.len(),
        });
        T::write_le(&p.values, &mut bytes);
    }
    let manifest = CheckpointManifest {
        format: FORMAT.into(),
        dtype: T::DTYPE.into(),
        spec: model.spec.clone(),
        blob: blob
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Checkpoint(format!("bad checkpoint path {}", path.display())))?
            .into(),
        tensors,
        metadata,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(&blob, bytes)?;
    fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn decode<T: Scalar, S: Scalar>(bytes: &[u8]) -> Vec<T> {
    S::read_le(bytes)
        .into_iter()
        .map(|v| T::of(v.to_f64().unwrap()))
        .collect()
}

/// Loads a checkpoint, converting stored values to `T` if the dtype differs.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(Model<T>, CheckpointManifest)> {
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    if manifest.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "unknown checkpoint format {:?}",
            manifest.format
        )));
    }
    let width = match manifest.dtype.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(Error::Checkpoint(format!("unsupported dtype {other:?}"))),
    };
    let layout = manifest.spec.param_layout();
    if layout.len() != manifest.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "spec expects {} tensors, manifest lists {}",
            layout.len(),
            manifest.tensors.len()
        )));
    }
    let blob_file = path.parent().unwrap_or(Path::new("")).join(&manifest.blob);
    let bytes = fs::read(&blob_file)?;
    let mut model = Model::<T>::zeros(manifest.spec.clone())?;
    for ((entry, (name, shape)), slot) in manifest.tensors.iter().zip(&layout).zip(&mut model.params) {
        if &entry.name != name || &entry.shape != shape {
            return Err(Error::Checkpoint(format!(
                "tensor {} {:?} does not match expected {} {:?}",
                entry.name, entry.shape, name, shape
            )));
        }
        let end = entry.offset + numel(shape) * width;
        let raw = bytes
            .get(entry.offset..end)
            .ok_or_else(|| Error::Truncated(format!("checkpoint tensor {}", entry.name)))?;
        let values = if width == 4 {
            decode::<T, f32>(raw)
        } else {
            decode::<T, f64>(raw)
        };
        *slot = Tensor::new(shape.clone(), values)?;
    }
    Ok((model, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Architecture;

    #[test]
    fn round_trip_and_cast() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck").join("model.json");
        let spec = ModelSpec::conv(Architecture::Seq2seq, &[3, 3], &[2, 1], 6);
        let model = Model::<f32>::init(spec, 4).unwrap();
        save_checkpoint(&model, &path, serde_json::json!({"seed": 4})).unwrap();

        let (back, manifest) = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(manifest.metadata["seed"], 4);

        let (wide, _) = load_checkpoint::<f64>(&path).unwrap();
        assert_eq!(wide.params[0].values[0], model.params[0].values[0] as f64);
    }

    #[test]
    fn truncated_blob_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let spec = ModelSpec::conv(Architecture::Convlstm, &[3], &[1], 5);
        save_checkpoint(&Model::<f64>::init(spec, 1).unwrap(), &path, serde_json::Value::Null).unwrap();
        let blob = path.with_extension("bin");
        let bytes = fs::read(&blob).unwrap();
        fs::write(&blob, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Truncated(_))));
    }
}
