//! Scratch probe (ignored): transfer gain across target regimes/windows.

mod common;

use std::sync::Arc;

use common::watts_strogatz;
use outbreak_core::dataset::{build_dataset, LabelingConfig, Split};
use outbreak_core::eval::auc;
use outbreak_core::graphwave::embed_nodes;
use outbreak_core::models::{
    adapt_wavelet, finetune, pretrain, Classifier, FinetuneConfig, OgwnConfig, OgwnModel,
    PretrainConfig, ScenarioSpec, TrainConfig,
};
use outbreak_core::netgen::NetworkSpec;
use outbreak_core::sim::{run_batch, SimConfig, SirParams};

#[test]
#[ignore]
fn probe_transfer_gain() {
    let ogwn_arch = OgwnConfig::default();
    let mut scenarios = Vec::new();
    for (i, beta) in [0.02, 0.05, 0.065, 0.08].iter().enumerate() {
        scenarios.push(ScenarioSpec {
            network: NetworkSpec::Er {
                n: 1500,
                avg_degree: 5.0,
                rng_seed: 31,
            },
            beta: *beta,
            mu: 0.1,
            runs: 900,
            sim_seed: 300 + i as u64,
        });
    }
    for (i, beta) in [0.008, 0.02, 0.027, 0.035].iter().enumerate() {
        scenarios.push(ScenarioSpec {
            network: NetworkSpec::Ba {
                n: 1500,
                m: 3,
                rng_seed: 32,
            },
            beta: *beta,
            mu: 0.1,
            runs: 900,
            sim_seed: 400 + i as u64,
        });
    }
    let config = PretrainConfig {
        epochs: 100,
        ..PretrainConfig::new(scenarios, vec![4, 6, 10], ogwn_arch.clone())
    };
    let t0 = std::time::Instant::now();
    let pretrained = pretrain(&config, 77).unwrap();
    println!(
        "pretrained in {:.0}s, val auc {:.4}, skipped {}",
        t0.elapsed().as_secs_f64(),
        pretrained.report.best_val_auc,
        pretrained.skipped.len()
    );

    let target = watts_strogatz(1500, 3, 0.1, 90);
    for target_beta in [0.05, 0.065] {
        let params = SirParams::new(target_beta, 0.1).unwrap();
        let target_batch = run_batch(&target, &params, &SimConfig::new(555), 2000).unwrap();
        for t_o in [4u32, 6, 10] {
            let dataset = match build_dataset(
                &target_batch,
                t_o,
                &LabelingConfig::auto(),
                (0.25, 0.15, 0.6),
                9,
            ) {
                Ok(d) => d,
                Err(e) => {
                    println!("beta={target_beta} t_o={t_o}: dataset failed: {e}");
                    continue;
                }
            };
            let test = dataset.split(Split::Test);
            let labels: Vec<u8> = test.iter().map(|s| s.label).collect();
            let mut ft_aucs = Vec::new();
            let mut sc_aucs = Vec::new();
            let mut zero_auc = f64::NAN;
            for seed in [1u64, 2, 3, 4, 5] {
                let (ft, _) = finetune(
                    &pretrained.checkpoint,
                    &target,
                    &dataset,
                    &FinetuneConfig {
                        epochs: 10,
                        lr_multiplier: 0.1,
                        shuffle_seed: seed,
                    },
                )
                .unwrap();
                let scores: Vec<f64> = test
                    .iter()
                    .map(|s| ft.predict_proba(&s.observed).unwrap())
                    .collect();
                ft_aucs.push(auc(&labels, &scores).unwrap());

                if seed == 1 {
                    // Zero-shot: pretrained weights without finetuning.
                    let (zs, _) = finetune(
                        &pretrained.checkpoint,
                        &target,
                        &dataset,
                        &FinetuneConfig {
                            epochs: 0,
                            lr_multiplier: 0.1,
                            shuffle_seed: seed,
                        },
                    )
                    .unwrap();
                    let scores: Vec<f64> = test
                        .iter()
                        .map(|s| zs.predict_proba(&s.observed).unwrap())
                        .collect();
                    zero_auc = auc(&labels, &scores).unwrap();
                }

                let wavelet = adapt_wavelet(&ogwn_arch.wavelet, &target).unwrap();
                let embeddings = Arc::new(embed_nodes(&target, &wavelet).unwrap());
                let scratch_config = OgwnConfig {
                    wavelet,
                    init_seed: seed,
                    train: TrainConfig {
                        max_epochs: 10,
                        patience: 11,
                        shuffle_seed: seed,
                        ..ogwn_arch.train.clone()
                    },
                    ..ogwn_arch.clone()
                };
                let mut scratch = OgwnModel::new(scratch_config, embeddings).unwrap();
                let train_split = dataset.split(Split::Train);
                let val_split = dataset.split(Split::Validation);
                scratch.fit(&train_split, &val_split).unwrap();
                let scores: Vec<f64> = test
                    .iter()
                    .map(|s| scratch.predict_proba(&s.observed).unwrap())
                    .collect();
                sc_aucs.push(auc(&labels, &scores).unwrap());
            }
            let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
            println!(
                "beta={target_beta} t_o={t_o}: zero-shot {zero_auc:.4} ft {:.4} scratch {:.4} gain {:+.4} (pos frac {:.3})",
                mean(&ft_aucs),
                mean(&sc_aucs),
                mean(&ft_aucs) - mean(&sc_aucs),
                dataset.positive_fraction(),
            );
        }
    }
}
