//! Surveillance threshold: flag an outbreak once the observed cumulative
//! case count reaches a fixed number. Emits hard 0/1 scores, so its ROC is a
//! single operating point plus the corners.

use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledSample, ObservedSequence};

use super::{Classifier, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StConfig {
    pub threshold: u32,
}

#[derive(Debug, Clone)]
pub struct StModel {
    config: StConfig,
    name: String,
}

impl StModel {
    pub fn new(config: StConfig) -> Self {
        StModel {
            name: format!("st{}", config.threshold),
            config,
        }
    }
}

impl Classifier for StModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&mut self, _train: &[&LabeledSample], _val: &[&LabeledSample]) -> Result<(), ModelError> {
        Ok(())
    }

    fn predict_proba(&self, observed: &ObservedSequence) -> Result<f64, ModelError> {
        let cases = *observed.cum_counts.last().expect("non-empty window");
        Ok(f64::from(u8::from(cases >= self.config.threshold)))
    }
}
