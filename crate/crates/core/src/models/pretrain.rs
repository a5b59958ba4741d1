//! Pretrain-finetune: supervised multi-scenario pretraining of one OGWN on
//! pooled simulations spanning an infectivity grid over reference networks,
//! then brief adaptation on a small dataset from a disjoint network.
//!
//! Scenarios whose final-size histogram is not bimodal cannot be labeled and
//! are skipped with a warning; finetuning refuses any target graph that
//! appears in the pretraining provenance.

use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{auto_phi_star, label, truncate, Dataset, DatasetError, Split};
use crate::graphwave::embed_nodes;
use crate::netgen::{Graph, NetworkSpec};
use crate::nn::{AdamConfig, Checkpoint, ParamSet};
use crate::rng::stream_rng;
use crate::sim::{run_batch, SimConfig, SirParams};

use super::ogwn::{ogwn_features, OgwnConfig, OgwnModel, OgwnNet, OGWN_MODEL_KIND};
use super::{adapt_wavelet, ModelError, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub network: NetworkSpec,
    pub beta: f64,
    pub mu: f64,
    pub runs: u64,
    pub sim_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    /// Reference networks crossed with the infectivity grid.
    pub scenarios: Vec<ScenarioSpec>,
    /// Each run contributes one sample per observation horizon.
    pub t_o_list: Vec<u32>,
    pub epochs: usize,
    pub ogwn: OgwnConfig,
    pub val_fraction: f64,
    pub split_seed: u64,
}

impl PretrainConfig {
    pub fn new(scenarios: Vec<ScenarioSpec>, t_o_list: Vec<u32>, ogwn: OgwnConfig) -> Self {
        PretrainConfig {
            scenarios,
            t_o_list,
            epochs: 100,
            ogwn,
            val_fraction: 0.1,
            split_seed: 11,
        }
    }
}

pub struct PretrainResult {
    pub checkpoint: Checkpoint,
    /// Human-readable reasons for skipped grid cells.
    pub skipped: Vec<String>,
    pub report: TrainReport,
}

type Pooled = Vec<(Vec<Vec<f64>>, u8)>;

/// Deterministic per-class split of the pooled samples into train and val.
pub(crate) fn split_pooled(pooled: Pooled, val_fraction: f64, seed: u64) -> (Pooled, Pooled) {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, (_, y)) in pooled.iter().enumerate() {
        by_class[*y as usize].push(i);
    }
    let mut rng = stream_rng(seed, 0);
    let mut val_idx = std::collections::HashSet::new();
    for idx in by_class.iter_mut() {
        idx.shuffle(&mut rng);
        let n_val = (idx.len() as f64 * val_fraction).round() as usize;
        for &i in idx.iter().take(n_val) {
            val_idx.insert(i);
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, sample) in pooled.into_iter().enumerate() {
        if val_idx.contains(&i) {
            val.push(sample);
        } else {
            train.push(sample);
        }
    }
    (train, val)
}

/// Train one OGWN for the configured number of epochs on the pooled
/// multi-scenario dataset; each scenario is labeled with its own
/// histogram-valley threshold. The checkpoint records the full provenance.
pub fn pretrain(config: &PretrainConfig, nn_seed: u64) -> Result<PretrainResult, ModelError> {
    let mut pooled: Pooled = Vec::new();
    let mut graph_hashes: Vec<String> = Vec::new();
    let mut scenario_meta: Vec<serde_json::Value> = Vec::new();
    let mut skipped: Vec<String> = Vec::new();

    for (idx, scenario) in config.scenarios.iter().enumerate() {
        let graph = scenario.network.realize()?;
        let params = SirParams::new(scenario.beta, scenario.mu)?;
        let sim_config = SimConfig::new(scenario.sim_seed);
        let batch = run_batch(&graph, &params, &sim_config, scenario.runs)?;
        let sizes = batch.final_sizes();
        let phi_star = match auto_phi_star(&sizes, batch.n_nodes) {
            Ok(p) => p,
            Err(DatasetError::Unimodal { modes }) => {
                let reason = format!(
                    "scenario {idx} (beta={}, mu={}): {modes} mode(s), cannot label; skipped",
                    scenario.beta, scenario.mu
                );
                eprintln!("warning: {reason}");
                skipped.push(reason);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let wavelet = adapt_wavelet(&config.ogwn.wavelet, &graph)?;
        let embeddings = embed_nodes(&graph, &wavelet)?;
        for run in &batch.runs {
            let y = label(run.trajectory.final_r, phi_star);
            for &t_o in &config.t_o_list {
                let obs = truncate(&run.trajectory, &run.record, t_o);
                pooled.push((ogwn_features(&embeddings, &obs)?, y));
            }
        }
        graph_hashes.push(batch.graph_hash.clone());
        scenario_meta.push(serde_json::json!({
            "network": scenario.network,
            "beta": scenario.beta,
            "mu": scenario.mu,
            "runs": scenario.runs,
            "sim_seed": scenario.sim_seed,
            "phi_star": phi_star,
        }));
    }

    if pooled.is_empty() {
        return Err(ModelError::AllScenariosSkipped);
    }

    let (train, val) = split_pooled(pooled, config.val_fraction, config.split_seed);
    let (layout, bigru, head) = OgwnModel::build_layout(&config.ogwn);
    let mut params = ParamSet::init_uniform(layout, nn_seed);
    let net = OgwnNet {
        bigru: &bigru,
        head: &head,
    };
    // Fixed-epoch pretraining: patience disabled, best-validation weights
    // kept.
    let train_config = TrainConfig {
        max_epochs: config.epochs,
        patience: config.epochs + 1,
        ..config.ogwn.train.clone()
    };
    let report = super::train_net(&net, &mut params, &train, &val, &train_config)?;

    let provenance = serde_json::json!({
        "graph_hashes": graph_hashes,
        "scenarios": scenario_meta,
        "skipped": skipped,
        "t_o_list": config.t_o_list,
        "nn_seed": nn_seed,
        "epochs": config.epochs,
    });
    let checkpoint = Checkpoint::from_params(
        OGWN_MODEL_KIND,
        serde_json::to_value(&config.ogwn).expect("config serializes"),
        &params,
        provenance,
    );
    Ok(PretrainResult {
        checkpoint,
        skipped,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    /// Finetuning learning rate = pretraining rate * this factor.
    pub lr_multiplier: f64,
    pub shuffle_seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 10,
            lr_multiplier: 0.1,
            shuffle_seed: 0,
        }
    }
}

fn pretraining_hashes(checkpoint: &Checkpoint) -> Result<Vec<String>, ModelError> {
    checkpoint
        .provenance
        .get("graph_hashes")
        .and_then(|v| v.as_array())
        .map(|arr| {
            arr.iter()
                .filter_map(|h| h.as_str().map(str::to_string))
                .collect()
        })
        .ok_or_else(|| ModelError::BadCheckpoint("missing graph_hashes in provenance".into()))
}

/// Continue training all parameters of a pretrained OGWN on the target
/// dataset's train split at a reduced learning rate, with embeddings
/// recomputed on the target graph. The target must be disjoint from every
/// pretraining network.
pub fn finetune(
    checkpoint: &Checkpoint,
    target_graph: &Graph,
    target: &Dataset,
    config: &FinetuneConfig,
) -> Result<(OgwnModel, TrainReport), ModelError> {
    checkpoint.check_kind(OGWN_MODEL_KIND)?;
    let target_hash = target_graph.content_hash();
    let hashes = pretraining_hashes(checkpoint)?;
    if hashes.contains(&target_hash) {
        return Err(ModelError::ProvenanceOverlap { hash: target_hash });
    }
    if target.provenance.graph_hash != target_hash {
        return Err(ModelError::BadCheckpoint(format!(
            "target dataset was built on graph {}, not on the supplied graph {target_hash}",
            target.provenance.graph_hash
        )));
    }

    let ogwn_config: OgwnConfig = serde_json::from_value(checkpoint.config.clone())
        .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
    let wavelet = adapt_wavelet(&ogwn_config.wavelet, target_graph)?;
    let embeddings = Arc::new(embed_nodes(target_graph, &wavelet)?);
    let mut model = OgwnModel::from_checkpoint(checkpoint, embeddings)?;

    let train_split = target.split(Split::Train);
    let val_split = target.split(Split::Validation);
    let base = &ogwn_config.train;
    let train_config = TrainConfig {
        adam: AdamConfig {
            lr: base.adam.lr * config.lr_multiplier,
            ..base.adam
        },
        batch_size: base.batch_size,
        max_epochs: config.epochs,
        patience: config.epochs + 1,
        shuffle_seed: config.shuffle_seed,
    };
    let report = model.train_more(&train_split, &val_split, &train_config)?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, LabelingConfig};
    use crate::graphwave::WaveletConfig;
    use crate::netgen::generate_er;

    fn tiny_ogwn_config() -> OgwnConfig {
        OgwnConfig {
            wavelet: WaveletConfig {
                sample_points: crate::graphwave::linspace(0.0, 50.0, 4),
                ..Default::default()
            },
            hidden_dim: 6,
            mlp_hidden: vec![],
            init_seed: 1,
            train: TrainConfig {
                batch_size: 32,
                ..Default::default()
            },
        }
    }

    fn bimodal_scenario(seed: u64) -> ScenarioSpec {
        // ER(300, k=6) with high per-step infectivity: robustly bimodal.
        ScenarioSpec {
            network: NetworkSpec::Er {
                n: 300,
                avg_degree: 6.0,
                rng_seed: seed,
            },
            beta: 0.4,
            mu: 0.9,
            runs: 400,
            sim_seed: seed + 1000,
        }
    }

    fn subcritical_scenario(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            beta: 0.02,
            ..bimodal_scenario(seed)
        }
    }

    #[test]
    fn unimodal_cells_are_skipped_with_warning() {
        let config = PretrainConfig {
            epochs: 1,
            ..PretrainConfig::new(
                vec![subcritical_scenario(1), bimodal_scenario(2)],
                vec![4],
                tiny_ogwn_config(),
            )
        };
        let result = pretrain(&config, 3).unwrap();
        assert_eq!(result.skipped.len(), 1);
        assert!(result.skipped[0].contains("skipped"));
        let hashes = pretraining_hashes(&result.checkpoint).unwrap();
        assert_eq!(hashes.len(), 1);
    }

    #[test]
    fn all_cells_skipped_is_an_error() {
        let config = PretrainConfig {
            epochs: 1,
            ..PretrainConfig::new(vec![subcritical_scenario(5)], vec![4], tiny_ogwn_config())
        };
        assert!(matches!(
            pretrain(&config, 3),
            Err(ModelError::AllScenariosSkipped)
        ));
    }

    #[test]
    fn pretrain_is_deterministic_and_matches_manual_training() {
        let config = PretrainConfig {
            epochs: 2,
            ..PretrainConfig::new(vec![bimodal_scenario(7)], vec![3, 6], tiny_ogwn_config())
        };
        let a = pretrain(&config, 21).unwrap();
        let b = pretrain(&config, 21).unwrap();
        assert_eq!(
            a.checkpoint.to_json().unwrap(),
            b.checkpoint.to_json().unwrap()
        );

        // Single-cell pretraining is ordinary OGWN training on that cell's
        // pooled data: reproduce it by hand and compare parameters.
        let scenario = &config.scenarios[0];
        let graph = scenario.network.realize().unwrap();
        let params = SirParams::new(scenario.beta, scenario.mu).unwrap();
        let batch = run_batch(&graph, &params, &SimConfig::new(scenario.sim_seed), scenario.runs)
            .unwrap();
        let phi = auto_phi_star(&batch.final_sizes(), batch.n_nodes).unwrap();
        let wavelet = adapt_wavelet(&config.ogwn.wavelet, &graph).unwrap();
        let embeddings = embed_nodes(&graph, &wavelet).unwrap();
        let mut pooled: Pooled = Vec::new();
        for run in &batch.runs {
            let y = label(run.trajectory.final_r, phi);
            for &t_o in &config.t_o_list {
                let obs = truncate(&run.trajectory, &run.record, t_o);
                pooled.push((ogwn_features(&embeddings, &obs).unwrap(), y));
            }
        }
        let (train, val) = split_pooled(pooled, config.val_fraction, config.split_seed);
        let (layout, bigru, head) = OgwnModel::build_layout(&config.ogwn);
        let mut manual = ParamSet::init_uniform(layout, 21);
        let net = OgwnNet {
            bigru: &bigru,
            head: &head,
        };
        super::super::train_net(
            &net,
            &mut manual,
            &train,
            &val,
            &TrainConfig {
                max_epochs: config.epochs,
                patience: config.epochs + 1,
                ..config.ogwn.train.clone()
            },
        )
        .unwrap();
        let from_pretrain: Vec<f64> = a
            .checkpoint
            .params
            .iter()
            .flat_map(|t| t.data.clone())
            .collect();
        assert_eq!(from_pretrain, manual.data);
    }

    #[test]
    fn pooled_class_balance_within_per_cell_hull() {
        let scenarios = vec![
            bimodal_scenario(41),
            ScenarioSpec {
                beta: 0.3,
                ..bimodal_scenario(43)
            },
            ScenarioSpec {
                beta: 0.55,
                ..bimodal_scenario(47)
            },
        ];
        let config = PretrainConfig {
            epochs: 1,
            ..PretrainConfig::new(scenarios.clone(), vec![4], tiny_ogwn_config())
        };
        let result = pretrain(&config, 3).unwrap();

        // Recount per-cell balances with the thresholds the checkpoint
        // recorded, then check the pooled balance lies inside their hull.
        let meta = result.checkpoint.provenance["scenarios"].as_array().unwrap();
        let mut balances = Vec::new();
        let mut pooled_pos = 0.0;
        let mut pooled_n = 0.0;
        for (scenario, cell) in scenarios.iter().zip(meta) {
            let phi = cell["phi_star"].as_u64().unwrap() as u32;
            let graph = scenario.network.realize().unwrap();
            let params = SirParams::new(scenario.beta, scenario.mu).unwrap();
            let batch = run_batch(
                &graph,
                &params,
                &SimConfig::new(scenario.sim_seed),
                scenario.runs,
            )
            .unwrap();
            let pos = batch
                .runs
                .iter()
                .filter(|r| label(r.trajectory.final_r, phi) == 1)
                .count() as f64;
            balances.push(pos / scenario.runs as f64);
            pooled_pos += pos;
            pooled_n += scenario.runs as f64;
        }
        let pooled = pooled_pos / pooled_n;
        let lo = balances.iter().cloned().fold(f64::MAX, f64::min);
        let hi = balances.iter().cloned().fold(f64::MIN, f64::max);
        assert!(
            (lo..=hi).contains(&pooled),
            "pooled balance {pooled} outside hull [{lo}, {hi}] of {balances:?}"
        );
        assert!(hi > lo, "cells should differ in balance");
    }

    #[test]
    fn finetune_provenance_and_zero_epochs() {
        let config = PretrainConfig {
            epochs: 1,
            ..PretrainConfig::new(vec![bimodal_scenario(11)], vec![4], tiny_ogwn_config())
        };
        let result = pretrain(&config, 9).unwrap();

        // Finetuning on a pretraining network is refused.
        let same_graph = config.scenarios[0].network.realize().unwrap();
        let params = SirParams::new(0.4, 0.9).unwrap();
        let batch = run_batch(&same_graph, &params, &SimConfig::new(50), 300).unwrap();
        let ds = build_dataset(&batch, 4, &LabelingConfig::auto(), (0.6, 0.2, 0.2), 3).unwrap();
        assert!(matches!(
            finetune(&result.checkpoint, &same_graph, &ds, &FinetuneConfig::default()),
            Err(ModelError::ProvenanceOverlap { .. })
        ));

        // Zero finetune epochs leave the pretrained weights unchanged.
        let held_out = generate_er(300, 6.0, 999).unwrap();
        let batch2 = run_batch(&held_out, &params, &SimConfig::new(51), 300).unwrap();
        let ds2 = build_dataset(&batch2, 4, &LabelingConfig::auto(), (0.6, 0.2, 0.2), 3).unwrap();
        let (model, report) = finetune(
            &result.checkpoint,
            &held_out,
            &ds2,
            &FinetuneConfig {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(report.epochs_run, 0);
        let pretrained: Vec<f64> = result
            .checkpoint
            .params
            .iter()
            .flat_map(|t| t.data.clone())
            .collect();
        assert_eq!(model.params().data, pretrained);
    }
}
