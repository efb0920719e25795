//! Parameter checkpoints: one flat little-endian `f64` array (`<stem>.bin`)
//! plus a JSON manifest naming each tensor's shape and offset
//! (`<stem>.json`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::LayerParams;
use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    /// Free-form model metadata (architecture, dimensions).
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
    pub total_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub data: Vec<f64>,
}

impl Checkpoint {
    pub fn new(kind: &str, meta: serde_json::Value) -> Self {
        Self {
            manifest: Manifest {
                kind: kind.to_string(),
                meta,
                tensors: Vec::new(),
                total_len: 0,
            },
            data: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, shape: Vec<usize>, values: &[f64]) {
        self.manifest.tensors.push(TensorEntry {
            name: name.to_string(),
            shape,
            offset: self.data.len(),
        });
        self.data.extend_from_slice(values);
        self.manifest.total_len = self.data.len();
    }

    pub fn push_layer(&mut self, prefix: &str, layer: &LayerParams) {
        let w = &layer.weight;
        self.push(&format!("{prefix}.weight"), vec![w.rows(), w.cols()], w.as_slice());
        if let Some(b) = &layer.bias {
            self.push(&format!("{prefix}.bias"), vec![b.len()], b);
        }
    }

    pub fn tensor(&self, name: &str) -> Result<(&[usize], &[f64])> {
        let entry = self
            .manifest
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no tensor `{name}`")))?;
        let len: usize = entry.shape.iter().product();
        let values = self
            .data
            .get(entry.offset..entry.offset + len)
            .ok_or_else(|| Error::InvalidArgument(format!("tensor `{name}` out of bounds")))?;
        Ok((&entry.shape, values))
    }

    pub fn layer(&self, prefix: &str) -> Result<LayerParams> {
        let (shape, w) = self.tensor(&format!("{prefix}.weight"))?;
        if shape.len() != 2 {
            return Err(Error::Shape(format!("`{prefix}.weight` is not a matrix")));
        }
        let weight = DenseMatrix::from_vec(shape[0], shape[1], w.to_vec())?;
        let bias = self
            .tensor(&format!("{prefix}.bias"))
            .ok()
            .map(|(_, b)| b.to_vec());
        Ok(LayerParams::from_weight(weight, bias))
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bin = dir.join(format!("{stem}.bin"));
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
        let json = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(&json, text).map_err(|e| Error::io(&json, e))
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let json = dir.join(format!("{stem}.json"));
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let bin = dir.join(format!("{stem}.bin"));
        let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        if bytes.len() != manifest.total_len * 8 {
            return Err(Error::Shape(format!(
                "{} holds {} bytes, manifest expects {}",
                bin.display(),
                bytes.len(),
                manifest.total_len * 8
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self { manifest, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_roundtrip() {
        let tmp = tempfile::tempdir().unwrap();
        let layer = LayerParams::glorot(3, 2, true, &mut crate::rng::seeded(1));
        let mut ck = Checkpoint::new("test", serde_json::json!({"a": 1}));
        ck.push_layer("l0", &layer);
        ck.save(tmp.path(), "model").unwrap();
        let back = Checkpoint::load(tmp.path(), "model").unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.layer("l0").unwrap(), layer);
        assert!(back.layer("l1").is_err());
    }
}
