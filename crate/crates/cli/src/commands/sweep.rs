use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use outbreak_core::dataset::LabelingConfig;
use outbreak_core::eval::{sweep_observation_times, SweepConfig};
use outbreak_core::graphwave::linspace;
use outbreak_core::models::{
    GraphContext, ModelSpec, OcnnConfig, OgwnConfig, TrainConfig,
};
use outbreak_core::nn::AdamConfig;
use outbreak_core::sim::{run_batch, SimConfig, SirParams};
use serde::Deserialize;

use super::{load_graph, parse_ratios, parse_u32_list, require_all};
use crate::error::CliError;
use crate::manifest::write_manifest;

#[derive(Args)]
pub struct SweepArgs {
    /// TOML file with the same keys as the flags; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated observation times, e.g. 4,8,12,16,20.
    #[arg(long)]
    pub t_o_list: Option<String>,
    /// Comma-separated model names from st5|st15|st25|knn|ocnn|ogwn.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub phi_star: Option<u32>,
    #[arg(long)]
    pub auto_phi: bool,
    #[arg(long, value_parser = parse_ratios)]
    pub split: Option<(f64, f64, f64)>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// GRU hidden units per direction for the sweep's ogwn cells.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Characteristic-function points (embedding width = 2x).
    #[arg(long)]
    pub embedding_points: Option<usize>,
    /// Embedding table width and filters per window for ocnn cells.
    #[arg(long)]
    pub ocnn_embed: Option<usize>,
    #[arg(long)]
    pub ocnn_filters: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    graph: Option<PathBuf>,
    beta: Option<f64>,
    mu: Option<f64>,
    runs: Option<u64>,
    seed: Option<u64>,
    t_o_list: Option<Vec<u32>>,
    models: Option<Vec<String>>,
    phi_star: Option<u32>,
    auto_phi: Option<bool>,
    split: Option<(f64, f64, f64)>,
    split_seed: Option<u64>,
    epochs: Option<usize>,
    patience: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    hidden: Option<usize>,
    embedding_points: Option<usize>,
    ocnn_embed: Option<usize>,
    ocnn_filters: Option<usize>,
    out_dir: Option<PathBuf>,
}

pub fn run(args: SweepArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: SweepFile = match &args.config {
        Some(path) => super::read_toml(path)?,
        None => SweepFile::default(),
    };
    let graph_path = args.graph.or(file.graph);
    let beta = args.beta.or(file.beta);
    let mu = args.mu.or(file.mu);
    let runs = args.runs.or(file.runs);
    let t_o_list = match args.t_o_list {
        Some(raw) => Some(parse_u32_list(&raw).map_err(CliError::Validation)?),
        None => file.t_o_list,
    };
    let out_dir = args.out_dir.or(file.out_dir);
    let mut missing = Vec::new();
    if graph_path.is_none() {
        missing.push("graph");
    }
    if beta.is_none() {
        missing.push("beta");
    }
    if mu.is_none() {
        missing.push("mu");
    }
    if runs.is_none() {
        missing.push("runs");
    }
    if t_o_list.is_none() {
        missing.push("t_o_list");
    }
    if out_dir.is_none() {
        missing.push("out_dir");
    }
    require_all(missing)?;
    let (graph_path, beta, mu, runs, t_o_list, out_dir) = (
        graph_path.expect("checked"),
        beta.expect("checked"),
        mu.expect("checked"),
        runs.expect("checked"),
        t_o_list.expect("checked"),
        out_dir.expect("checked"),
    );
    let seed = args.seed.or(file.seed).unwrap_or(1);
    let model_names = args.models.or(file.models).unwrap_or_else(|| {
        ["st5", "st15", "st25", "knn", "ocnn", "ogwn"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    });
    let labeling = if args.auto_phi || file.auto_phi.unwrap_or(false) {
        LabelingConfig::auto()
    } else {
        match args.phi_star.or(file.phi_star) {
            Some(p) => LabelingConfig::fixed(p),
            None => LabelingConfig::auto(),
        }
    };

    let train = TrainConfig {
        adam: AdamConfig {
            lr: args.lr.or(file.lr).unwrap_or(1e-3),
            ..AdamConfig::default()
        },
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(64),
        max_epochs: args.epochs.or(file.epochs).unwrap_or(50),
        patience: args.patience.or(file.patience).unwrap_or(10),
        shuffle_seed: seed,
    };
    let embedding_points = args.embedding_points.or(file.embedding_points).unwrap_or(25);
    let hidden = args.hidden.or(file.hidden).unwrap_or(64);
    let ocnn_embed = args.ocnn_embed.or(file.ocnn_embed).unwrap_or(32);
    let ocnn_filters = args.ocnn_filters.or(file.ocnn_filters).unwrap_or(64);

    let graph = load_graph(&graph_path)?;
    let params = SirParams::new(beta, mu).map_err(CliError::validation)?;
    let sim_config = SimConfig::new(seed);
    println!("simulating {runs} runs on {} nodes...", graph.n());
    let batch = run_batch(&graph, &params, &sim_config, runs).map_err(CliError::validation)?;

    let mut base_wavelet = outbreak_core::graphwave::WaveletConfig::default();
    base_wavelet.sample_points = linspace(0.0, 100.0, embedding_points);
    let needs_embeddings = model_names.iter().any(|m| m == "ogwn");
    let ctx = if needs_embeddings {
        println!("computing structural embeddings...");
        GraphContext::auto(&graph, &base_wavelet)?
    } else {
        GraphContext::without_graph()
    };

    let mut specs = Vec::new();
    for name in &model_names {
        let spec = match name.as_str() {
            "ocnn" => ModelSpec::Ocnn(OcnnConfig {
                embed_dim: ocnn_embed,
                filters_per_window: ocnn_filters,
                init_seed: seed,
                train: train.clone(),
                ..OcnnConfig::default()
            }),
            "ogwn" => {
                let wavelet = outbreak_core::models::adapt_wavelet(&base_wavelet, &graph)?;
                ModelSpec::Ogwn(OgwnConfig {
                    wavelet,
                    hidden_dim: hidden,
                    mlp_hidden: vec![hidden],
                    init_seed: seed,
                    train: train.clone(),
                })
            }
            other => ModelSpec::parse(other)?,
        };
        specs.push(spec);
    }

    let sweep_config = SweepConfig {
        split_ratios: args.split.or(file.split).unwrap_or((0.8, 0.1, 0.1)),
        split_seed: args.split_seed.or(file.split_seed).unwrap_or(7),
        cutoff: 0.5,
    };
    println!("sweeping {} models x {} observation times...", specs.len(), t_o_list.len());
    let report = sweep_observation_times(&specs, &ctx, &batch, &t_o_list, &labeling, &sweep_config);

    std::fs::create_dir_all(&out_dir).map_err(CliError::runtime)?;
    let csv = format!("# outbreak-metrics v1\n{}", report.to_csv());
    std::fs::write(out_dir.join("metrics.csv"), csv).map_err(CliError::runtime)?;
    let report_json = serde_json::json!({"format_version": 1, "report": &report});
    std::fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&report_json).expect("report serializes"),
    )
    .map_err(CliError::runtime)?;
    let roc_json = serde_json::to_string_pretty(
        &serde_json::json!({"format_version": 1, "rocs": &report.rocs}),
    )
    .expect("roc serializes");
    std::fs::write(out_dir.join("roc.json"), roc_json).map_err(CliError::runtime)?;
    write_manifest(
        &out_dir.join("manifest.json"),
        "sweep",
        serde_json::json!({
            "graph": graph_path,
            "graph_hash": graph.content_hash(),
            "beta": beta,
            "mu": mu,
            "runs": runs,
            "seed": seed,
            "t_o_list": t_o_list,
            "models": model_names,
            "labeling": labeling,
            "split": sweep_config.split_ratios,
            "split_seed": sweep_config.split_seed,
            "train": train,
            "hidden": hidden,
            "embedding_points": embedding_points,
            "ocnn_embed": ocnn_embed,
            "ocnn_filters": ocnn_filters,
        }),
        started,
    )?;

    for row in &report.rows {
        match (&row.failed, row.auc) {
            (Some(reason), _) => println!("{:>6} t_o={:<3} FAILED: {reason}", row.model, row.t_o),
            (None, Some(auc)) => {
                println!("{:>6} t_o={:<3} auc={auc:.4}", row.model, row.t_o)
            }
            (None, None) => println!("{:>6} t_o={:<3} auc=NA", row.model, row.t_o),
        }
    }
    println!("wrote metrics to {}", out_dir.display());
    Ok(())
}
