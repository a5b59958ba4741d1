//! The predictors: surveillance thresholds, KNN, Outbreak-CNN, Outbreak-GWN,
//! and the pretrain-finetune procedure, all behind one classifier contract
//! (fit on labeled splits, emit an outbreak probability in [0, 1]).

pub mod features;
pub mod knn;
pub mod ocnn;
pub mod ogwn;
pub mod pretrain;
pub mod st;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, LabeledSample, ObservedSequence};
use crate::graphwave::{GraphwaveError, NodeEmbeddings, WaveletConfig};
use crate::netgen::{Graph, NetgenError};
use crate::nn::{adam_step, AdamConfig, NnError, OptimizerState, ParamSet};
use crate::rng::stream_rng;
use crate::sim::SimError;

pub use knn::{KnnConfig, KnnModel};
pub use ocnn::{OcnnConfig, OcnnModel};
pub use ogwn::{ogwn_features, OgwnConfig, OgwnModel};
pub use pretrain::{finetune, pretrain, FinetuneConfig, PretrainConfig, PretrainResult, ScenarioSpec};
pub use st::{StConfig, StModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Graphwave(#[from] GraphwaveError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Netgen(#[from] NetgenError),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("k = {k} exceeds training set size {n}")]
    KExceedsTrainSize { k: usize, n: usize },
    #[error("model has not been fitted")]
    NotTrained,
    #[error("training diverged (non-finite loss or gradient) at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("target graph {hash} overlaps the pretraining networks")]
    ProvenanceOverlap { hash: String },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("every pretraining scenario was skipped (no bimodal cell)")]
    AllScenariosSkipped,
    #[error("embedding dim {got} does not match model input {expected}")]
    EmbeddingDimMismatch { expected: usize, got: usize },
    #[error("ogwn needs a graph context with embeddings")]
    MissingEmbeddings,
    #[error("unknown model name {0:?}")]
    UnknownModel(String),
}

/// Fit on labeled splits, score observation windows.
pub trait Classifier: Send {
    fn name(&self) -> &str;
    fn fit(
        &mut self,
        train: &[&LabeledSample],
        val: &[&LabeledSample],
    ) -> Result<(), ModelError>;
    fn predict_proba(&self, observed: &ObservedSequence) -> Result<f64, ModelError>;
}

/// Per-graph state shared by models: the structural embeddings. Models that
/// only read counts ignore it, so a context without embeddings is valid for
/// them.
pub struct GraphContext {
    pub graph_hash: String,
    pub embeddings: Option<Arc<NodeEmbeddings>>,
}

impl GraphContext {
    pub fn new(graph: &Graph, wavelet: &WaveletConfig) -> Result<Self, ModelError> {
        let embeddings = crate::graphwave::embed_nodes(graph, wavelet)?;
        Ok(GraphContext {
            graph_hash: graph.content_hash(),
            embeddings: Some(Arc::new(embeddings)),
        })
    }

    /// Scale and Chebyshev order tuned to this graph, sample grid kept.
    pub fn auto(graph: &Graph, base: &WaveletConfig) -> Result<Self, ModelError> {
        let wavelet = adapt_wavelet(base, graph)?;
        Self::new(graph, &wavelet)
    }

    /// For count-only models evaluated without the contact network.
    pub fn without_graph() -> Self {
        GraphContext {
            graph_hash: String::new(),
            embeddings: None,
        }
    }
}

/// Retune scale and order for a graph while keeping the sample grid (and so
/// the embedding width) fixed.
pub fn adapt_wavelet(base: &WaveletConfig, graph: &Graph) -> Result<WaveletConfig, ModelError> {
    let auto = WaveletConfig::for_graph(graph)?;
    Ok(WaveletConfig {
        scale: auto.scale,
        cheb_order: auto.cheb_order,
        sample_points: base.sample_points.clone(),
    })
}

/// A model choice plus its configuration; `build` instantiates a fresh
/// untrained classifier for one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    St(StConfig),
    Knn(KnnConfig),
    Ocnn(OcnnConfig),
    Ogwn(OgwnConfig),
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::St(cfg) => format!("st{}", cfg.threshold),
            ModelSpec::Knn(_) => "knn".to_string(),
            ModelSpec::Ocnn(_) => "ocnn".to_string(),
            ModelSpec::Ogwn(_) => "ogwn".to_string(),
        }
    }

    /// CLI-facing names: st5|st15|st25|knn|ocnn|ogwn.
    pub fn parse(name: &str) -> Result<Self, ModelError> {
        match name {
            "st5" => Ok(ModelSpec::St(StConfig { threshold: 5 })),
            "st15" => Ok(ModelSpec::St(StConfig { threshold: 15 })),
            "st25" => Ok(ModelSpec::St(StConfig { threshold: 25 })),
            "knn" => Ok(ModelSpec::Knn(KnnConfig::default())),
            "ocnn" => Ok(ModelSpec::Ocnn(OcnnConfig::default())),
            "ogwn" => Ok(ModelSpec::Ogwn(OgwnConfig::default())),
            other => Err(ModelError::UnknownModel(other.to_string())),
        }
    }

    pub fn build(&self, ctx: &GraphContext) -> Result<Box<dyn Classifier>, ModelError> {
        Ok(match self {
            ModelSpec::St(cfg) => Box::new(StModel::new(*cfg)),
            ModelSpec::Knn(cfg) => Box::new(KnnModel::new(cfg.clone())),
            ModelSpec::Ocnn(cfg) => Box::new(OcnnModel::new(cfg.clone())),
            ModelSpec::Ogwn(cfg) => {
                let embeddings = ctx
                    .embeddings
                    .clone()
                    .ok_or(ModelError::MissingEmbeddings)?;
                Box::new(OgwnModel::new(cfg.clone(), embeddings)?)
            }
        })
    }
}

/// Gradient-descent settings shared by the neural models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 64,
            max_epochs: 50,
            patience: 10,
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub epoch_losses: Vec<f64>,
    pub val_aucs: Vec<f64>,
}

/// One forward/backward architecture trained by [`train_net`]. The logit is
/// pre-sigmoid; `forward_backward` accumulates d(loss)/d(params) scaled by
/// `scale` into `grads` and returns the per-sample loss.
pub(crate) trait SequenceNet: Sync {
    type Input: Sync + Send;

    fn logit(&self, params: &[f64], input: &Self::Input) -> Result<f64, NnError>;

    fn forward_backward(
        &self,
        params: &[f64],
        input: &Self::Input,
        label: f64,
        scale: f64,
        grads: &mut [f64],
    ) -> Result<f64, NnError>;
}

/// Per-sample loss and logit gradient for a sigmoid+BCE head.
pub(crate) fn bce_on_logit(logit: f64, label: f64) -> (f64, f64) {
    let p = crate::nn::sigmoid(logit).clamp(crate::nn::loss::BCE_CLAMP_EPS, 1.0 - crate::nn::loss::BCE_CLAMP_EPS);
    let loss = -(label * p.ln() + (1.0 - label) * (1.0 - p).ln());
    (loss, p - label)
}

/// Samples per parallel gradient chunk. Fixed so the floating-point
/// reduction order, and therefore the result, is identical for any worker
/// count.
const GRAD_CHUNK: usize = 16;

fn batch_gradients<N: SequenceNet>(
    net: &N,
    params: &ParamSet,
    data: &[(N::Input, u8)],
    batch: &[usize],
) -> Result<(f64, Vec<f64>), NnError> {
    let scale = 1.0 / batch.len() as f64;
    let chunks: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = vec![0.0; params.data.len()];
            let mut loss = 0.0;
            for &i in chunk {
                let (input, label) = &data[i];
                loss += net.forward_backward(
                    &params.data,
                    input,
                    f64::from(*label),
                    scale,
                    &mut grads,
                )?;
            }
            Ok((loss, grads))
        })
        .collect::<Result<_, NnError>>()?;
    let mut total_loss = 0.0;
    let mut grads = vec![0.0; params.data.len()];
    for (l, g) in chunks {
        total_loss += l;
        for (acc, v) in grads.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    Ok((total_loss * scale, grads))
}

pub(crate) fn predict_scores<N: SequenceNet>(
    net: &N,
    params: &ParamSet,
    inputs: &[&N::Input],
) -> Result<Vec<f64>, NnError> {
    inputs
        .par_iter()
        .map(|input| Ok(crate::nn::sigmoid(net.logit(&params.data, input)?)))
        .collect()
}

/// Minibatch training with early stopping on validation AUC. The best
/// validation parameters are restored at the end. Deterministic given the
/// shuffle seed, for any worker count.
pub(crate) fn train_net<N: SequenceNet>(
    net: &N,
    params: &mut ParamSet,
    train: &[(N::Input, u8)],
    val: &[(N::Input, u8)],
    config: &TrainConfig,
) -> Result<TrainReport, ModelError> {
    use rand::seq::SliceRandom;
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut optimizer = OptimizerState::new(config.adam, params.data.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best_params = params.data.clone();
    let mut best_val_auc = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut stale_epochs = 0usize;
    let mut epoch_losses = Vec::new();
    let mut val_aucs = Vec::new();

    let val_labels: Vec<u8> = val.iter().map(|(_, y)| *y).collect();
    let val_inputs: Vec<&N::Input> = val.iter().map(|(x, _)| x).collect();

    let mut epochs_run = 0usize;
    for epoch in 0..config.max_epochs {
        let mut rng = stream_rng(config.shuffle_seed, epoch as u64 + 1);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size.max(1)) {
            let (loss, grads) = batch_gradients(net, params, train, batch)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::Divergence { epoch });
            }
            adam_step(&mut optimizer, &mut params.data, &grads)?;
            loss_sum += loss;
            batches += 1;
        }
        epochs_run = epoch + 1;
        epoch_losses.push(loss_sum / batches.max(1) as f64);

        let val_auc = if val.is_empty() {
            // No validation data: treat falling train loss as progress.
            -epoch_losses[epoch]
        } else {
            let scores = predict_scores(net, params, &val_inputs)?;
            // A degenerate single-class validation set scores as chance.
            crate::eval::auc(&val_labels, &scores).unwrap_or(0.5)
        };
        val_aucs.push(val_auc);
        if val_auc > best_val_auc + 1e-12 {
            best_val_auc = val_auc;
            best_epoch = epoch + 1;
            best_params.copy_from_slice(&params.data);
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }
    params.data.copy_from_slice(&best_params);
    Ok(TrainReport {
        epochs_run,
        best_epoch,
        best_val_auc,
        epoch_losses,
        val_aucs,
    })
}
