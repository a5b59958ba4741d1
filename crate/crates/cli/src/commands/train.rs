use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use outbreak_core::dataset::{Dataset, Split};
use outbreak_core::graphwave::linspace;
use outbreak_core::models::{
    Classifier, GraphContext, OcnnConfig, OcnnModel, OgwnConfig, OgwnModel, TrainConfig,
};
use outbreak_core::nn::AdamConfig;

use super::load_graph;
use crate::error::CliError;
use crate::manifest::write_manifest;

#[derive(Args)]
pub struct TrainArgs {
    /// ocnn or ogwn (st*/knn have no trainable state; use `evaluate`).
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub data: PathBuf,
    /// Edge list of the contact network (required for ogwn).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// GRU hidden units per direction (ogwn).
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Characteristic-function sample points (ogwn embedding width = 2x).
    #[arg(long, default_value_t = 25)]
    pub embedding_points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn train_config(args: &TrainArgs) -> TrainConfig {
    TrainConfig {
        adam: AdamConfig {
            lr: args.lr,
            ..AdamConfig::default()
        },
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        patience: args.patience,
        shuffle_seed: args.seed,
    }
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let dataset = Dataset::load_jsonl(&args.data).map_err(CliError::validation)?;
    let train = dataset.split(Split::Train);
    let val = dataset.split(Split::Validation);

    let (checkpoint, best_val_auc) = match args.model.as_str() {
        "ocnn" => {
            let config = OcnnConfig {
                init_seed: args.seed,
                train: train_config(&args),
                ..OcnnConfig::default()
            };
            let mut model = OcnnModel::new(config);
            model.fit(&train, &val)?;
            let auc = model.report().map(|r| r.best_val_auc).unwrap_or(f64::NAN);
            (
                model.to_checkpoint(serde_json::json!({
                    "data": args.data,
                    "dataset": dataset.provenance,
                })),
                auc,
            )
        }
        "ogwn" => {
            let graph_path = args.graph.clone().ok_or_else(|| {
                CliError::Usage("--model ogwn requires --graph".into())
            })?;
            let graph = load_graph(&graph_path)?;
            if graph.content_hash() != dataset.provenance.graph_hash {
                return Err(CliError::Validation(format!(
                    "dataset was simulated on graph {}, but {} has hash {}",
                    dataset.provenance.graph_hash,
                    graph_path.display(),
                    graph.content_hash()
                )));
            }
            let mut config = OgwnConfig {
                hidden_dim: args.hidden,
                init_seed: args.seed,
                train: train_config(&args),
                ..OgwnConfig::default()
            };
            config.wavelet.sample_points = linspace(0.0, 100.0, args.embedding_points);
            config.wavelet = outbreak_core::models::adapt_wavelet(&config.wavelet, &graph)?;
            let ctx = GraphContext::new(&graph, &config.wavelet)?;
            let embeddings = ctx.embeddings.clone().expect("context built with a graph");
            let mut model = OgwnModel::new(config, embeddings)?;
            model.fit(&train, &val)?;
            let auc = model.report().map(|r| r.best_val_auc).unwrap_or(f64::NAN);
            (
                model.to_checkpoint(serde_json::json!({
                    "data": args.data,
                    "graph_hash": ctx.graph_hash,
                    "dataset": dataset.provenance,
                })),
                auc,
            )
        }
        other => {
            return Err(CliError::Validation(format!(
                "--model must be ocnn or ogwn (got {other:?}); st*/knn need no training artifact"
            )))
        }
    };

    checkpoint.save(&args.out).map_err(CliError::runtime)?;
    write_manifest(
        &args.out.with_extension("manifest.json"),
        "train",
        serde_json::json!({
            "model": args.model,
            "data": args.data,
            "graph": args.graph,
            "seed": args.seed,
            "epochs": args.epochs,
            "patience": args.patience,
            "lr": args.lr,
            "batch_size": args.batch_size,
            "hidden": args.hidden,
            "embedding_points": args.embedding_points,
        }),
        started,
    )?;
    println!(
        "trained {} (best val AUC {:.4}); checkpoint at {}",
        args.model,
        best_val_auc,
        args.out.display()
    );
    Ok(())
}
