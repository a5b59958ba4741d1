use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use outbreak_core::dataset::{Dataset, Split};
use outbreak_core::graphwave::linspace;
use outbreak_core::models::{
    finetune, pretrain, FinetuneConfig, OgwnConfig, PretrainConfig, ScenarioSpec, TrainConfig,
};
use outbreak_core::nn::{AdamConfig, Checkpoint};
use serde::Deserialize;

use super::load_graph;
use crate::error::CliError;
use crate::manifest::write_manifest;

#[derive(Args)]
pub struct PretrainArgs {
    /// TOML config: scenario grid, observation times, architecture.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the nn_seed from the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PretrainFile {
    scenarios: Vec<ScenarioSpec>,
    t_o_list: Vec<u32>,
    #[serde(default)]
    epochs: Option<usize>,
    #[serde(default)]
    nn_seed: Option<u64>,
    #[serde(default)]
    val_fraction: Option<f64>,
    #[serde(default)]
    split_seed: Option<u64>,
    #[serde(default)]
    ogwn: Option<OgwnOverrides>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OgwnOverrides {
    hidden_dim: Option<usize>,
    mlp_hidden: Option<Vec<usize>>,
    embedding_points: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
}

pub fn run_pretrain(args: PretrainArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: PretrainFile = super::read_toml(&args.config)?;
    if file.scenarios.is_empty() {
        return Err(CliError::Validation("config has no scenarios".into()));
    }
    if file.t_o_list.is_empty() {
        return Err(CliError::Validation("config has no t_o_list".into()));
    }

    let overrides = file.ogwn.unwrap_or_default();
    let mut ogwn = OgwnConfig::default();
    if let Some(h) = overrides.hidden_dim {
        ogwn.hidden_dim = h;
        ogwn.mlp_hidden = vec![h];
    }
    if let Some(m) = overrides.mlp_hidden {
        ogwn.mlp_hidden = m;
    }
    if let Some(d) = overrides.embedding_points {
        ogwn.wavelet.sample_points = linspace(0.0, 100.0, d);
    }
    ogwn.train = TrainConfig {
        adam: AdamConfig {
            lr: overrides.lr.unwrap_or(1e-3),
            ..AdamConfig::default()
        },
        batch_size: overrides.batch_size.unwrap_or(64),
        ..TrainConfig::default()
    };

    let mut config = PretrainConfig::new(file.scenarios, file.t_o_list, ogwn);
    if let Some(e) = args.epochs.or(file.epochs) {
        config.epochs = e;
    }
    if let Some(v) = file.val_fraction {
        config.val_fraction = v;
    }
    if let Some(s) = file.split_seed {
        config.split_seed = s;
    }
    let nn_seed = args.seed.or(file.nn_seed).unwrap_or(1);

    println!(
        "pretraining on {} scenarios x {} observation times for {} epochs...",
        config.scenarios.len(),
        config.t_o_list.len(),
        config.epochs
    );
    let result = pretrain(&config, nn_seed)?;
    for reason in &result.skipped {
        println!("skipped: {reason}");
    }
    result.checkpoint.save(&args.out).map_err(CliError::runtime)?;
    write_manifest(
        &args.out.with_extension("manifest.json"),
        "pretrain",
        serde_json::json!({
            "config_file": args.config,
            "pretrain": config,
            "nn_seed": nn_seed,
        }),
        started,
    )?;
    println!(
        "pretrained checkpoint at {} (best val AUC {:.4})",
        args.out.display(),
        result.report.best_val_auc
    );
    Ok(())
}

#[derive(Args)]
pub struct FinetuneArgs {
    /// Pretrained OGWN checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Held-out target network (edge list).
    #[arg(long)]
    pub graph: PathBuf,
    /// Target dataset built on that network.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr_mult: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also evaluate on the target test split and write a metrics CSV.
    #[arg(long)]
    pub out_metrics: Option<PathBuf>,
}

pub fn run_finetune(args: FinetuneArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let checkpoint = Checkpoint::load(&args.checkpoint).map_err(CliError::validation)?;
    let graph = load_graph(&args.graph)?;
    let dataset = Dataset::load_jsonl(&args.data).map_err(CliError::validation)?;
    let config = FinetuneConfig {
        epochs: args.epochs,
        lr_multiplier: args.lr_mult,
        shuffle_seed: args.seed,
    };
    let (model, report) = finetune(&checkpoint, &graph, &dataset, &config)?;

    let provenance = serde_json::json!({
        "finetuned_from": args.checkpoint,
        "target_graph_hash": graph.content_hash(),
        "target_data": args.data,
        "epochs": args.epochs,
        "lr_multiplier": args.lr_mult,
        "seed": args.seed,
        "pretraining": checkpoint.provenance,
    });
    model
        .to_checkpoint(provenance)
        .save(&args.out)
        .map_err(CliError::runtime)?;

    if let Some(path) = &args.out_metrics {
        use outbreak_core::models::Classifier;
        let test = dataset.split(Split::Test);
        let mut labels = Vec::new();
        let mut scores = Vec::new();
        for s in &test {
            labels.push(s.label);
            scores.push(model.predict_proba(&s.observed)?);
        }
        let counts = outbreak_core::eval::confusion(&labels, &scores, 0.5)
            .map_err(CliError::validation)?;
        let m = outbreak_core::eval::metrics(&counts).map_err(CliError::validation)?;
        let auc = outbreak_core::eval::auc(&labels, &scores).ok();
        let report = outbreak_core::eval::MetricsReport {
            rows: vec![outbreak_core::eval::MetricsRow {
                model: "pretrain-finetune".into(),
                t_o: dataset.provenance.t_o,
                accuracy: Some(m.accuracy),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                auc,
                n_test: test.len(),
                failed: None,
            }],
            rocs: vec![],
        };
        let csv = format!("# outbreak-metrics v1\n{}", report.to_csv());
        std::fs::write(path, csv).map_err(CliError::runtime)?;
    }

    write_manifest(
        &args.out.with_extension("manifest.json"),
        "finetune",
        serde_json::json!({
            "checkpoint": args.checkpoint,
            "graph": args.graph,
            "data": args.data,
            "epochs": args.epochs,
            "lr_mult": args.lr_mult,
            "seed": args.seed,
        }),
        started,
    )?;
    println!(
        "finetuned for {} epochs (last val AUC {:.4}); checkpoint at {}",
        report.epochs_run,
        report.val_aucs.last().copied().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}
