use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{NeuralError, ParamSet, Result, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Self-describing parameter container: named row-major tensors plus a
/// free-form metadata block (model variant, sizes, vocabulary hash, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params(params: &ParamSet, metadata: BTreeMap<String, serde_json::Value>) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            metadata,
            params: params
                .iter()
                .map(|(_, name, t)| NamedTensor {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    values: t.values().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_params(&self) -> Result<ParamSet> {
        let mut ps = ParamSet::new();
        for nt in &self.params {
            ps.add(nt.name.clone(), Tensor::new(nt.shape.clone(), nt.values.clone())?)?;
        }
        Ok(ps)
    }

    /// Copies stored values into an already-built parameter set; names and
    /// shapes must match exactly.
    pub fn load_into(&self, params: &mut ParamSet) -> Result<()> {
        if self.params.len() != params.len() {
            return Err(NeuralError::Checkpoint(format!(
                "expected {} tensors, checkpoint has {}",
                params.len(),
                self.params.len()
            )));
        }
        for nt in &self.params {
            let id = params
                .id(&nt.name)
                .ok_or_else(|| NeuralError::UnknownParam(nt.name.clone()))?;
            if params.get(id).shape() != nt.shape.as_slice() {
                return Err(NeuralError::Shape {
                    op: "checkpoint",
                    left: params.get(id).shape().to_vec(),
                    right: nt.shape.clone(),
                });
            }
            params.set_values(&nt.name, &nt.values)?;
        }
        Ok(())
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .and_then(|v| v.as_str())
            .ok_or_else(|| NeuralError::Checkpoint(format!("missing metadata `{key}`")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(v) => {
                return Err(NeuralError::Checkpoint(format!(
                    "unsupported format version {v} (reader understands {CHECKPOINT_VERSION})"
                )))
            }
            None => return Err(NeuralError::Checkpoint("missing format_version".into())),
        }
        let ck: Checkpoint = serde_json::from_value(raw)?;
        for nt in &ck.params {
            if nt.shape.iter().product::<usize>() != nt.values.len() {
                return Err(NeuralError::Checkpoint(format!(
                    "tensor `{}` has {} values for shape {:?}",
                    nt.name,
                    nt.values.len(),
                    nt.shape
                )));
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
