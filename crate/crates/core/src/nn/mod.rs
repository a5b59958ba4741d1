//! Minimal dense neural kernel: GRU/BiGRU, 1D convolution with max-over-time
//! pooling, MLP, binary cross-entropy, reverse-mode gradients, and an
//! adaptive-moment optimizer. Double precision throughout; everything is
//! deterministic given a seed.
//!
//! Parameters of a model live in one flat vector ([`ParamSet`]); layers hold
//! named [`Slot`]s into it. Gradients use a plain buffer of the same length,
//! which keeps the optimizer and checkpoint code independent of the
//! architectures.

pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod gru;
mod linalg;
pub mod loss;
pub mod mlp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use conv::{conv1d_maxpool, ConvText};
pub use gru::{bigru_forward, gru_step, BiGru, GruCell};
pub use loss::{bce_loss, sigmoid};
pub use mlp::Mlp;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("token {token} out of vocabulary (size {vocab})")]
    InvalidToken { token: usize, vocab: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint format version {found}, expected {expected}")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("checkpoint parameter {name}: shape mismatch")]
    CheckpointShape { name: String },
    #[error("checkpoint is for model kind {found}, expected {expected}")]
    CheckpointKind { found: String, expected: String },
}

/// Row-major dense array with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(NnError::ShapeMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn validate_finite(&self, what: &'static str) -> Result<(), NnError> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NnError::NonFinite(what))
        }
    }
}

/// A named span of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub len: usize,
}

impl Slot {
    pub fn of<'a>(&self, data: &'a [f64]) -> &'a [f64] {
        &data[self.offset..self.offset + self.len]
    }

    pub fn of_mut<'a>(&self, data: &'a mut [f64]) -> &'a mut [f64] {
        &mut data[self.offset..self.offset + self.len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub slot: Slot,
}

/// Registry of named parameter arrays in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamLayout {
    pub entries: Vec<LayoutEntry>,
    pub total: usize,
}

impl ParamLayout {
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> Slot {
        let len = shape.iter().product();
        let slot = Slot {
            offset: self.total,
            len,
        };
        self.entries.push(LayoutEntry {
            name: name.into(),
            shape: shape.to_vec(),
            slot,
        });
        self.total += len;
        slot
    }
}

/// Flat parameter vector plus its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub layout: ParamLayout,
    pub data: Vec<f64>,
}

impl ParamSet {
    pub fn zeros(layout: ParamLayout) -> Self {
        let data = vec![0.0; layout.total];
        ParamSet { layout, data }
    }

    /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per entry, where the
    /// fan-in is the trailing dimension; biases start at zero.
    pub fn init_uniform(layout: ParamLayout, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(seed, 0);
        let mut data = vec![0.0; layout.total];
        for entry in &layout.entries {
            if entry.shape.len() < 2 {
                continue; // bias
            }
            let fan_in = *entry.shape.last().expect("non-scalar shape");
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in entry.slot.of_mut(&mut data) {
                *v = rng.gen_range(-bound..bound);
            }
        }
        ParamSet { layout, data }
    }

    pub fn grad_buffer(&self) -> Vec<f64> {
        vec![0.0; self.data.len()]
    }

    pub fn validate_finite(&self, what: &'static str) -> Result<(), NnError> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NnError::NonFinite(what))
        }
    }

    /// Named tensors in layout order, for checkpoints.
    pub fn to_named_tensors(&self) -> Vec<(String, Tensor)> {
        self.layout
            .entries
            .iter()
            .map(|e| {
                (
                    e.name.clone(),
                    Tensor {
                        shape: e.shape.clone(),
                        data: e.slot.of(&self.data).to_vec(),
                    },
                )
            })
            .collect()
    }

    /// Restore values from named tensors; every layout entry must be present
    /// with a matching shape.
    pub fn load_named_tensors(&mut self, tensors: &[(String, Tensor)]) -> Result<(), NnError> {
        for entry in &self.layout.entries {
            let found = tensors
                .iter()
                .find(|(name, _)| *name == entry.name)
                .ok_or_else(|| NnError::CheckpointShape {
                    name: entry.name.clone(),
                })?;
            if found.1.shape != entry.shape {
                return Err(NnError::CheckpointShape {
                    name: entry.name.clone(),
                });
            }
            entry.slot.of_mut(&mut self.data).copy_from_slice(&found.1.data);
        }
        Ok(())
    }
}
