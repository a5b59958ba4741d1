//! K-nearest neighbors over cumulative-count curves. The score is the
//! positive fraction among the k nearest training samples (Euclidean
//! distance, ties broken by lower sample id).

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledSample, ObservedSequence};

use super::{Classifier, ModelError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    config: KnnConfig,
    feature_len: usize,
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    ids: Vec<u64>,
}

impl KnnModel {
    pub fn new(config: KnnConfig) -> Self {
        KnnModel {
            config,
            feature_len: 0,
            features: Vec::new(),
            labels: Vec::new(),
            ids: Vec::new(),
        }
    }

    /// Cumulative counts, zero-padded or truncated to the fitted width.
    fn feature(&self, observed: &ObservedSequence, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (o, c) in out.iter_mut().zip(&observed.cum_counts) {
            *o = f64::from(*c);
        }
        out
    }
}

impl Classifier for KnnModel {
    fn name(&self) -> &str {
        "knn"
    }

    fn fit(&mut self, train: &[&LabeledSample], _val: &[&LabeledSample]) -> Result<(), ModelError> {
        if train.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        if self.config.k > train.len() {
            return Err(ModelError::KExceedsTrainSize {
                k: self.config.k,
                n: train.len(),
            });
        }
        self.feature_len = train[0].observed.cum_counts.len();
        let len = self.feature_len;
        self.features = train.iter().map(|s| self.feature(&s.observed, len)).collect();
        self.labels = train.iter().map(|s| s.label).collect();
        self.ids = train.iter().map(|s| s.id).collect();
        Ok(())
    }

    fn predict_proba(&self, observed: &ObservedSequence) -> Result<f64, ModelError> {
        if self.features.is_empty() {
            return Err(ModelError::NotTrained);
        }
        let query = self.feature(observed, self.feature_len);
        let mut candidates: Vec<(f64, u64, u8)> = self
            .features
            .iter()
            .zip(self.labels.iter().zip(&self.ids))
            .map(|(f, (&label, &id))| {
                let d2: f64 = f
                    .iter()
                    .zip(&query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, id, label)
            })
            .collect();
        let k = self.config.k;
        candidates.select_nth_unstable_by(k - 1, |a, b| {
            a.0.partial_cmp(&b.0).expect("finite distance").then(a.1.cmp(&b.1))
        });
        let positives = candidates[..k].iter().filter(|(_, _, y)| *y == 1).count();
        Ok(positives as f64 / k as f64)
    }
}

/// Exhaustive neighbor search; the oracle the model is tested against.
#[cfg(test)]
fn brute_force_neighbors(
    features: &[Vec<f64>],
    ids: &[u64],
    query: &[f64],
    k: usize,
) -> Vec<u64> {
    let mut all: Vec<(f64, u64)> = features
        .iter()
        .zip(ids)
        .map(|(f, &id)| {
            let d2: f64 = f.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, id)
        })
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all[..k].iter().map(|(_, id)| *id).collect()
}
