//! Outbreak-CNN: log-banded count tokens, embedding, multi-window
//! convolution with max-over-time pooling, logistic head.

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledSample, ObservedSequence};
use crate::nn::{Checkpoint, ConvText, Mlp, NnError, ParamLayout, ParamSet};

use super::features::{tokenize, COUNT_VOCAB};
use super::{bce_on_logit, Classifier, ModelError, SequenceNet, TrainConfig, TrainReport};

pub const OCNN_MODEL_KIND: &str = "ocnn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcnnConfig {
    pub vocab: usize,
    pub embed_dim: usize,
    pub windows: Vec<usize>,
    pub filters_per_window: usize,
    /// Hidden widths of the head; empty means a single logistic layer.
    pub head_hidden: Vec<usize>,
    pub init_seed: u64,
    pub train: TrainConfig,
}

impl Default for OcnnConfig {
    fn default() -> Self {
        OcnnConfig {
            vocab: COUNT_VOCAB,
            embed_dim: 32,
            windows: vec![2, 3, 4],
            filters_per_window: 64,
            head_hidden: vec![],
            init_seed: 1,
            train: TrainConfig::default(),
        }
    }
}

pub struct OcnnModel {
    config: OcnnConfig,
    conv: ConvText,
    head: Mlp,
    params: ParamSet,
    trained: bool,
    report: Option<TrainReport>,
}

struct OcnnNet<'a> {
    conv: &'a ConvText,
    head: &'a Mlp,
}

impl SequenceNet for OcnnNet<'_> {
    type Input = Vec<usize>;

    fn logit(&self, params: &[f64], input: &Self::Input) -> Result<f64, NnError> {
        let features = crate::nn::conv1d_maxpool(self.conv, params, input)?;
        Ok(self.head.forward(params, &features)?[0])
    }

    fn forward_backward(
        &self,
        params: &[f64],
        input: &Self::Input,
        label: f64,
        scale: f64,
        grads: &mut [f64],
    ) -> Result<f64, NnError> {
        let (features, conv_cache) = self.conv.forward_cached(params, input)?;
        let (logit, head_cache) = self.head.forward_cached(params, &features)?;
        let (loss, dlogit) = bce_on_logit(logit[0], label);
        let d_features = self
            .head
            .backward(params, &head_cache, &[dlogit * scale], grads);
        self.conv.backward(params, &conv_cache, &d_features, grads);
        Ok(loss)
    }
}

impl OcnnModel {
    pub fn new(config: OcnnConfig) -> Self {
        let mut layout = ParamLayout::default();
        let conv = ConvText::register(
            &mut layout,
            "ocnn",
            config.vocab,
            config.embed_dim,
            &config.windows,
            config.filters_per_window,
        );
        let mut head_dims = vec![conv.feature_dim()];
        head_dims.extend(&config.head_hidden);
        head_dims.push(1);
        let head = Mlp::register(&mut layout, "ocnn.head", &head_dims);
        let params = ParamSet::init_uniform(layout, config.init_seed);
        OcnnModel {
            config,
            conv,
            head,
            params,
            trained: false,
            report: None,
        }
    }

    pub fn report(&self) -> Option<&TrainReport> {
        self.report.as_ref()
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn to_checkpoint(&self, provenance: serde_json::Value) -> Checkpoint {
        Checkpoint::from_params(
            OCNN_MODEL_KIND,
            serde_json::to_value(&self.config).expect("config serializes"),
            &self.params,
            provenance,
        )
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint) -> Result<Self, ModelError> {
        checkpoint.check_kind(OCNN_MODEL_KIND)?;
        let config: OcnnConfig = serde_json::from_value(checkpoint.config.clone())
            .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
        let mut model = Self::new(config);
        checkpoint.load_into(&mut model.params)?;
        model.trained = true;
        Ok(model)
    }

    fn prepare(samples: &[&LabeledSample]) -> Vec<(Vec<usize>, u8)> {
        samples
            .iter()
            .map(|s| (tokenize(&s.observed), s.label))
            .collect()
    }
}

impl Classifier for OcnnModel {
    fn name(&self) -> &str {
        "ocnn"
    }

    fn fit(&mut self, train: &[&LabeledSample], val: &[&LabeledSample]) -> Result<(), ModelError> {
        let train_data = Self::prepare(train);
        let val_data = Self::prepare(val);
        let net = OcnnNet {
            conv: &self.conv,
            head: &self.head,
        };
        let report = super::train_net(&net, &mut self.params, &train_data, &val_data, &self.config.train)?;
        self.report = Some(report);
        self.trained = true;
        Ok(())
    }

    fn predict_proba(&self, observed: &ObservedSequence) -> Result<f64, ModelError> {
        let net = OcnnNet {
            conv: &self.conv,
            head: &self.head,
        };
        let tokens = tokenize(observed);
        Ok(crate::nn::sigmoid(net.logit(&self.params.data, &tokens)?))
    }
}
