//! Outbreak-GWN: per-step fusion of the infection count with the mean
//! structural embedding of that step's newly infected nodes, read by a
//! BiGRU, scored by an MLP head.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledSample, ObservedSequence};
use crate::graphwave::{NodeEmbeddings, WaveletConfig};
use crate::nn::{BiGru, Checkpoint, Mlp, NnError, ParamLayout, ParamSet};

use super::{bce_on_logit, Classifier, ModelError, SequenceNet, TrainConfig, TrainReport};

pub const OGWN_MODEL_KIND: &str = "ogwn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgwnConfig {
    pub wavelet: WaveletConfig,
    /// Hidden units per GRU direction.
    pub hidden_dim: usize,
    /// Hidden widths of the head between the BiGRU output and the logit.
    pub mlp_hidden: Vec<usize>,
    pub init_seed: u64,
    pub train: TrainConfig,
}

impl Default for OgwnConfig {
    fn default() -> Self {
        OgwnConfig {
            wavelet: WaveletConfig::default(),
            hidden_dim: 64,
            mlp_hidden: vec![64],
            init_seed: 1,
            train: TrainConfig::default(),
        }
    }
}

impl OgwnConfig {
    /// Sequence feature width: count channel plus embedding width.
    pub fn feature_dim(&self) -> usize {
        1 + self.wavelet.embedding_dim()
    }
}

/// Per-step model input: log1p of the new-infection count concatenated with
/// the mean embedding of the newly infected nodes (zeros when none). Step 0
/// carries the seed nodes.
pub fn ogwn_features(
    embeddings: &NodeEmbeddings,
    observed: &ObservedSequence,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let width = 1 + embeddings.dim;
    let mut steps = Vec::with_capacity(observed.infected_nodes_per_step.len());
    for nodes in &observed.infected_nodes_per_step {
        let mut feature = vec![0.0; width];
        feature[0] = (nodes.len() as f64).ln_1p();
        if !nodes.is_empty() {
            for &node in nodes {
                let row = embeddings.row(node)?;
                for (f, v) in feature[1..].iter_mut().zip(row) {
                    *f += v;
                }
            }
            let inv = 1.0 / nodes.len() as f64;
            for f in feature[1..].iter_mut() {
                *f *= inv;
            }
        }
        steps.push(feature);
    }
    Ok(steps)
}

pub struct OgwnModel {
    config: OgwnConfig,
    embeddings: Arc<NodeEmbeddings>,
    bigru: BiGru,
    head: Mlp,
    params: ParamSet,
    report: Option<TrainReport>,
}

pub(crate) struct OgwnNet<'a> {
    pub(crate) bigru: &'a BiGru,
    pub(crate) head: &'a Mlp,
}

impl SequenceNet for OgwnNet<'_> {
    type Input = Vec<Vec<f64>>;

    fn logit(&self, params: &[f64], input: &Self::Input) -> Result<f64, NnError> {
        let rep = crate::nn::bigru_forward(self.bigru, params, input)?;
        Ok(self.head.forward(params, &rep)?[0])
    }

    fn forward_backward(
        &self,
        params: &[f64],
        input: &Self::Input,
        label: f64,
        scale: f64,
        grads: &mut [f64],
    ) -> Result<f64, NnError> {
        let (rep, gru_cache) = self.bigru.forward_cached(params, input)?;
        let (logit, head_cache) = self.head.forward_cached(params, &rep)?;
        let (loss, dlogit) = bce_on_logit(logit[0], label);
        let d_rep = self
            .head
            .backward(params, &head_cache, &[dlogit * scale], grads);
        self.bigru.backward(params, &gru_cache, &d_rep, grads);
        Ok(loss)
    }
}

impl OgwnModel {
    pub(crate) fn build_layout(config: &OgwnConfig) -> (ParamLayout, BiGru, Mlp) {
        let mut layout = ParamLayout::default();
        let bigru = BiGru::register(
            &mut layout,
            "ogwn.bigru",
            config.hidden_dim,
            config.feature_dim(),
        );
        let mut head_dims = vec![bigru.output_dim()];
        head_dims.extend(&config.mlp_hidden);
        head_dims.push(1);
        let head = Mlp::register(&mut layout, "ogwn.head", &head_dims);
        (layout, bigru, head)
    }

    pub fn new(config: OgwnConfig, embeddings: Arc<NodeEmbeddings>) -> Result<Self, ModelError> {
        if embeddings.dim != config.wavelet.embedding_dim() {
            return Err(ModelError::EmbeddingDimMismatch {
                expected: config.wavelet.embedding_dim(),
                got: embeddings.dim,
            });
        }
        let (layout, bigru, head) = Self::build_layout(&config);
        let params = ParamSet::init_uniform(layout, config.init_seed);
        Ok(OgwnModel {
            config,
            embeddings,
            bigru,
            head,
            params,
            report: None,
        })
    }

    pub fn config(&self) -> &OgwnConfig {
        &self.config
    }

    pub fn report(&self) -> Option<&TrainReport> {
        self.report.as_ref()
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn to_checkpoint(&self, provenance: serde_json::Value) -> Checkpoint {
        Checkpoint::from_params(
            OGWN_MODEL_KIND,
            serde_json::to_value(&self.config).expect("config serializes"),
            &self.params,
            provenance,
        )
    }

    /// Rebuild a model from a checkpoint, pairing it with embeddings for the
    /// graph it will be applied to.
    pub fn from_checkpoint(
        checkpoint: &Checkpoint,
        embeddings: Arc<NodeEmbeddings>,
    ) -> Result<Self, ModelError> {
        checkpoint.check_kind(OGWN_MODEL_KIND)?;
        let config: OgwnConfig = serde_json::from_value(checkpoint.config.clone())
            .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
        let mut model = Self::new(config, embeddings)?;
        checkpoint.load_into(&mut model.params)?;
        Ok(model)
    }

    pub(crate) fn prepare(
        embeddings: &NodeEmbeddings,
        samples: &[&LabeledSample],
    ) -> Result<Vec<(Vec<Vec<f64>>, u8)>, ModelError> {
        samples
            .iter()
            .map(|s| Ok((ogwn_features(embeddings, &s.observed)?, s.label)))
            .collect()
    }

    /// Continue training from the current parameters (used by finetuning).
    pub fn train_more(
        &mut self,
        train: &[&LabeledSample],
        val: &[&LabeledSample],
        config: &TrainConfig,
    ) -> Result<TrainReport, ModelError> {
        let train_data = Self::prepare(&self.embeddings, train)?;
        let val_data = Self::prepare(&self.embeddings, val)?;
        let net = OgwnNet {
            bigru: &self.bigru,
            head: &self.head,
        };
        let report = super::train_net(&net, &mut self.params, &train_data, &val_data, config)?;
        self.report = Some(report.clone());
        Ok(report)
    }
}

impl Classifier for OgwnModel {
    fn name(&self) -> &str {
        "ogwn"
    }

    fn fit(&mut self, train: &[&LabeledSample], val: &[&LabeledSample]) -> Result<(), ModelError> {
        let train_config = self.config.train.clone();
        self.train_more(train, val, &train_config)?;
        Ok(())
    }

    fn predict_proba(&self, observed: &ObservedSequence) -> Result<f64, ModelError> {
        let features = ogwn_features(&self.embeddings, observed)?;
        let net = OgwnNet {
            bigru: &self.bigru,
            head: &self.head,
        };
        Ok(crate::nn::sigmoid(net.logit(&self.params.data, &features)?))
    }
}
