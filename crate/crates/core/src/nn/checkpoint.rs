//! Versioned checkpoint container: a config block, named parameter tensors
//! in a fixed order, and a provenance block. JSON on disk; f64 values
//! round-trip exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NnError, ParamSet, Tensor};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model_kind: String,
    pub config: serde_json::Value,
    pub params: Vec<NamedTensor>,
    pub provenance: serde_json::Value,
}

impl Checkpoint {
    pub fn from_params(
        model_kind: &str,
        config: serde_json::Value,
        params: &ParamSet,
        provenance: serde_json::Value,
    ) -> Self {
        let params = params
            .to_named_tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                shape: t.shape,
                data: t.data,
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            model_kind: model_kind.to_string(),
            config,
            params,
            provenance,
        }
    }

    pub fn check_kind(&self, expected: &str) -> Result<(), NnError> {
        if self.model_kind != expected {
            return Err(NnError::CheckpointKind {
                found: self.model_kind.clone(),
                expected: expected.to_string(),
            });
        }
        Ok(())
    }

    /// Copy parameter values into `target`; every entry must match by name
    /// and shape.
    pub fn load_into(&self, target: &mut ParamSet) -> Result<(), NnError> {
        let tensors: Vec<(String, Tensor)> = self
            .params
            .iter()
            .map(|nt| {
                (
                    nt.name.clone(),
                    Tensor {
                        shape: nt.shape.clone(),
                        data: nt.data.clone(),
                    },
                )
            })
            .collect();
        target.load_named_tensors(&tensors)
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self, NnError> {
        let ckpt: Checkpoint = serde_json::from_str(json)?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(NnError::CheckpointVersion {
                found: ckpt.format_version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        Ok(ckpt)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, NnError> {
        let json = std::fs::read_to_string(path)?;
        Self::from_json(&json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamLayout;

    fn sample_params() -> ParamSet {
        let mut layout = ParamLayout::default();
        layout.add("w", &[2, 3]);
        layout.add("b", &[2]);
        ParamSet::init_uniform(layout, 9)
    }

    #[test]
    fn json_round_trip_restores_exact_values() {
        let params = sample_params();
        let ckpt = Checkpoint::from_params(
            "ogwn",
            serde_json::json!({"hidden": 2}),
            &params,
            serde_json::json!({}),
        );
        let json = ckpt.to_json().unwrap();
        let back = Checkpoint::from_json(&json).unwrap();
        assert_eq!(back, ckpt);
        let mut restored = ParamSet::zeros(params.layout.clone());
        back.load_into(&mut restored).unwrap();
        assert_eq!(restored.data, params.data);
    }

    #[test]
    fn version_mismatch_rejected() {
        let params = sample_params();
        let mut ckpt = Checkpoint::from_params("ogwn", serde_json::Value::Null, &params, serde_json::Value::Null);
        ckpt.format_version = 99;
        let json = serde_json::to_string(&ckpt).unwrap();
        assert!(matches!(
            Checkpoint::from_json(&json),
            Err(NnError::CheckpointVersion { found: 99, .. })
        ));
    }

    #[test]
    fn shape_mismatch_rejected_on_load() {
        let params = sample_params();
        let ckpt = Checkpoint::from_params("ogwn", serde_json::Value::Null, &params, serde_json::Value::Null);
        let mut other_layout = ParamLayout::default();
        other_layout.add("w", &[3, 3]);
        other_layout.add("b", &[2]);
        let mut target = ParamSet::zeros(other_layout);
        assert!(matches!(
            ckpt.load_into(&mut target),
            Err(NnError::CheckpointShape { .. })
        ));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let params = sample_params();
        let ckpt = Checkpoint::from_params("ocnn", serde_json::Value::Null, &params, serde_json::Value::Null);
        assert!(ckpt.check_kind("ogwn").is_err());
        assert!(ckpt.check_kind("ocnn").is_ok());
    }
}
