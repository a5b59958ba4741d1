//! Classification metrics and observation-time sweeps.
//!
//! AUC uses the Mann-Whitney rank formulation with midranks for ties, which
//! makes it exactly the trapezoidal area under the ROC curve produced by
//! sweeping cutoffs over the distinct scores. Degenerate metrics surface as
//! explicit `None` markers, never as 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{build_dataset, LabelingConfig, Split};
use crate::models::{GraphContext, ModelError, ModelSpec};
use crate::sim::BatchResult;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("labels and scores differ in length: {labels} vs {scores}")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("empty input")]
    Empty,
    #[error("score {0} outside [0, 1]")]
    BadScore(f64),
    #[error("only one class present: AUC/ROC undefined")]
    SingleClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Tally predictions at a cutoff; a score >= cutoff predicts class 1.
pub fn confusion(labels: &[u8], scores: &[f64], cutoff: f64) -> Result<ConfusionCounts, EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut counts = ConfusionCounts {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (&y, &s) in labels.iter().zip(scores) {
        if !(0.0..=1.0).contains(&s) {
            return Err(EvalError::BadScore(s));
        }
        let predicted = s >= cutoff;
        match (y == 1, predicted) {
            (true, true) => counts.true_pos += 1,
            (true, false) => counts.false_neg += 1,
            (false, true) => counts.false_pos += 1,
            (false, false) => counts.true_neg += 1,
        }
    }
    Ok(counts)
}

/// Accuracy, precision, recall, F1. Ratios with an empty denominator are
/// `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn metrics(counts: &ConfusionCounts) -> Result<Metrics, EvalError> {
    let total = counts.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    Ok(Metrics {
        accuracy: (counts.true_pos + counts.true_neg) as f64 / total as f64,
        precision: ratio(counts.true_pos, counts.true_pos + counts.false_pos),
        recall: ratio(counts.true_pos, counts.true_pos + counts.false_neg),
        f1: ratio(
            2 * counts.true_pos,
            2 * counts.true_pos + counts.false_neg + counts.false_pos,
        ),
    })
}

/// Midranks of the scores (average rank within tied groups), 1-based.
fn midranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Mann-Whitney rank AUC with midranks for ties.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64, EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(EvalError::SingleClass);
    }
    let ranks = midranks(scores);
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&y, _)| y == 1)
        .map(|(_, r)| r)
        .sum();
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// ROC curve from a descending cutoff sweep over the distinct scores, with
/// the (0,0) and (1,1) endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false positive rate, true positive rate), non-decreasing in both.
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    pub fn trapezoid_auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum()
    }
}

pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Result<RocCurve, EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        // Take the whole tie group: every sample with score >= this cutoff
        // is predicted positive.
        let cutoff = scores[order[i]];
        while i < order.len() && scores[order[i]] == cutoff {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    if *points.last().expect("non-empty") != (1.0, 1.0) {
        points.push((1.0, 1.0));
    }
    Ok(RocCurve { points })
}

/// One evaluated (model, t_o) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub t_o: u32,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub n_test: usize,
    /// Set when the cell failed to train or evaluate; metrics are None.
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub rocs: Vec<RocEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocEntry {
    pub model: String,
    pub t_o: u32,
    pub curve: RocCurve,
}

impl MetricsReport {
    pub fn auc_series(&self, model: &str) -> Vec<(u32, f64)> {
        self.rows
            .iter()
            .filter(|r| r.model == model)
            .filter_map(|r| r.auc.map(|a| (r.t_o, a)))
            .collect()
    }

    /// CSV with NA markers for undefined metrics.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| match v {
            Some(x) => format!("{x}"),
            None => "NA".to_string(),
        };
        let mut out = String::from("model,t_o,accuracy,precision,recall,f1,auc,n_test\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.model,
                r.t_o,
                cell(r.accuracy),
                cell(r.precision),
                cell(r.recall),
                cell(r.f1),
                cell(r.auc),
                r.n_test
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub split_ratios: (f64, f64, f64),
    pub split_seed: u64,
    /// Classification cutoff for the threshold metrics.
    pub cutoff: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            split_ratios: (0.8, 0.1, 0.1),
            split_seed: 7,
            cutoff: 0.5,
        }
    }
}

/// Retrain and evaluate every model at every observation time. Each t_o gets
/// its own truncation of the batch and its own training run; a failing cell
/// is marked and the sweep continues.
pub fn sweep_observation_times(
    specs: &[ModelSpec],
    ctx: &GraphContext,
    batch: &BatchResult,
    t_o_list: &[u32],
    labeling: &LabelingConfig,
    sweep: &SweepConfig,
) -> MetricsReport {
    let mut report = MetricsReport::default();
    for &t_o in t_o_list {
        let dataset = match build_dataset(batch, t_o, labeling, sweep.split_ratios, sweep.split_seed)
        {
            Ok(d) => d,
            Err(e) => {
                for spec in specs {
                    report.rows.push(failed_row(&spec.name(), t_o, e.to_string()));
                }
                continue;
            }
        };
        let train = dataset.split(Split::Train);
        let val = dataset.split(Split::Validation);
        let test = dataset.split(Split::Test);
        for spec in specs {
            let name = spec.name();
            match evaluate_cell(spec, ctx, &train, &val, &test, sweep.cutoff) {
                Ok((row_metrics, cell_auc, curve)) => {
                    report.rows.push(MetricsRow {
                        model: name.clone(),
                        t_o,
                        accuracy: Some(row_metrics.accuracy),
                        precision: row_metrics.precision,
                        recall: row_metrics.recall,
                        f1: row_metrics.f1,
                        auc: cell_auc,
                        n_test: test.len(),
                        failed: None,
                    });
                    if let Some(curve) = curve {
                        report.rocs.push(RocEntry {
                            model: name,
                            t_o,
                            curve,
                        });
                    }
                }
                Err(e) => report.rows.push(failed_row(&name, t_o, e.to_string())),
            }
        }
    }
    report
}

fn failed_row(model: &str, t_o: u32, reason: String) -> MetricsRow {
    MetricsRow {
        model: model.to_string(),
        t_o,
        accuracy: None,
        precision: None,
        recall: None,
        f1: None,
        auc: None,
        n_test: 0,
        failed: Some(reason),
    }
}

type CellOutcome = (Metrics, Option<f64>, Option<RocCurve>);

fn evaluate_cell(
    spec: &ModelSpec,
    ctx: &GraphContext,
    train: &[&crate::dataset::LabeledSample],
    val: &[&crate::dataset::LabeledSample],
    test: &[&crate::dataset::LabeledSample],
    cutoff: f64,
) -> Result<CellOutcome, ModelError> {
    let mut model = spec.build(ctx)?;
    model.fit(train, val)?;
    let mut labels = Vec::with_capacity(test.len());
    let mut scores = Vec::with_capacity(test.len());
    for sample in test {
        labels.push(sample.label);
        scores.push(model.predict_proba(&sample.observed)?);
    }
    let counts =
        confusion(&labels, &scores, cutoff).map_err(|e| ModelError::Eval(e.to_string()))?;
    let m = metrics(&counts).map_err(|e| ModelError::Eval(e.to_string()))?;
    let cell_auc = match auc(&labels, &scores) {
        Ok(a) => Some(a),
        Err(EvalError::SingleClass) => None,
        Err(e) => return Err(ModelError::Eval(e.to_string())),
    };
    let curve = match roc_curve(&labels, &scores) {
        Ok(c) => Some(c),
        Err(EvalError::SingleClass) => None,
        Err(e) => return Err(ModelError::Eval(e.to_string())),
    };
    Ok((m, cell_auc, curve))
}
