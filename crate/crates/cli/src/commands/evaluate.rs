use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use outbreak_core::dataset::{Dataset, Split};
use outbreak_core::eval::{confusion, metrics, roc_curve, MetricsReport, MetricsRow, RocEntry};
use outbreak_core::models::{Classifier, GraphContext, ModelSpec, OcnnModel, OgwnModel};
use outbreak_core::nn::Checkpoint;

use super::load_graph;
use crate::error::CliError;
use crate::manifest::write_manifest;

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Fit this model in-process: st5|st15|st25|knn|ocnn|ogwn.
    #[arg(long, conflicts_with = "checkpoint")]
    pub model: Option<String>,
    /// Evaluate a saved checkpoint instead of fitting.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Contact network (required for ogwn).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub cutoff: f64,
    #[arg(long)]
    pub out_metrics: PathBuf,
    #[arg(long)]
    pub out_roc: Option<PathBuf>,
}

fn ogwn_context(args: &EvaluateArgs, dataset: &Dataset, wavelet: &outbreak_core::graphwave::WaveletConfig) -> Result<GraphContext, CliError> {
    let graph_path = args
        .graph
        .clone()
        .ok_or_else(|| CliError::Validation("ogwn evaluation requires --graph".into()))?;
    let graph = load_graph(&graph_path)?;
    if graph.content_hash() != dataset.provenance.graph_hash {
        return Err(CliError::Validation(format!(
            "dataset graph hash {} does not match {}",
            dataset.provenance.graph_hash,
            graph_path.display()
        )));
    }
    Ok(GraphContext::new(&graph, wavelet)?)
}

pub fn run(args: EvaluateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let dataset = Dataset::load_jsonl(&args.data).map_err(CliError::validation)?;
    let train = dataset.split(Split::Train);
    let val = dataset.split(Split::Validation);
    let test = dataset.split(Split::Test);

    let (name, model): (String, Box<dyn Classifier>) = match (&args.model, &args.checkpoint) {
        (Some(name), None) => {
            let spec = ModelSpec::parse(name)?;
            let ctx = match &spec {
                ModelSpec::Ogwn(cfg) => {
                    let wavelet = {
                        let graph_path = args.graph.clone().ok_or_else(|| {
                            CliError::Validation("ogwn evaluation requires --graph".into())
                        })?;
                        let graph = load_graph(&graph_path)?;
                        outbreak_core::models::adapt_wavelet(&cfg.wavelet, &graph)?
                    };
                    ogwn_context(&args, &dataset, &wavelet)?
                }
                _ => GraphContext::without_graph(),
            };
            let mut model = spec.build(&ctx)?;
            model.fit(&train, &val)?;
            (name.clone(), model)
        }
        (None, Some(path)) => {
            let ckpt = Checkpoint::load(path).map_err(CliError::validation)?;
            match ckpt.model_kind.as_str() {
                "ocnn" => (
                    "ocnn".to_string(),
                    Box::new(OcnnModel::from_checkpoint(&ckpt)?),
                ),
                "ogwn" => {
                    let config: outbreak_core::models::OgwnConfig =
                        serde_json::from_value(ckpt.config.clone())
                            .map_err(CliError::validation)?;
                    let ctx = ogwn_context(&args, &dataset, &config.wavelet)?;
                    (
                        "ogwn".to_string(),
                        Box::new(OgwnModel::from_checkpoint(
                            &ckpt,
                            ctx.embeddings.expect("context built with a graph"),
                        )?),
                    )
                }
                other => {
                    return Err(CliError::Validation(format!(
                        "cannot evaluate checkpoint of kind {other:?}"
                    )))
                }
            }
        }
        _ => {
            return Err(CliError::Usage(
                "choose exactly one of --model or --checkpoint".into(),
            ))
        }
    };

    let mut labels = Vec::with_capacity(test.len());
    let mut scores = Vec::with_capacity(test.len());
    for sample in &test {
        labels.push(sample.label);
        scores.push(model.predict_proba(&sample.observed)?);
    }
    let counts = confusion(&labels, &scores, args.cutoff).map_err(CliError::validation)?;
    let m = metrics(&counts).map_err(CliError::validation)?;
    let auc = outbreak_core::eval::auc(&labels, &scores).ok();
    let report = MetricsReport {
        rows: vec![MetricsRow {
            model: name.clone(),
            t_o: dataset.provenance.t_o,
            accuracy: Some(m.accuracy),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc,
            n_test: test.len(),
            failed: None,
        }],
        rocs: match roc_curve(&labels, &scores) {
            Ok(curve) => vec![RocEntry {
                model: name.clone(),
                t_o: dataset.provenance.t_o,
                curve,
            }],
            Err(_) => vec![],
        },
    };
    let csv = format!("# outbreak-metrics v1\n{}", report.to_csv());
    std::fs::write(&args.out_metrics, csv).map_err(CliError::runtime)?;
    if let Some(path) = &args.out_roc {
        let json = serde_json::to_string_pretty(
            &serde_json::json!({"format_version": 1, "rocs": &report.rocs}),
        )
        .expect("roc serializes");
        std::fs::write(path, json).map_err(CliError::runtime)?;
    }
    write_manifest(
        &args.out_metrics.with_extension("manifest.json"),
        "evaluate",
        serde_json::json!({
            "data": args.data,
            "model": args.model,
            "checkpoint": args.checkpoint,
            "graph": args.graph,
            "cutoff": args.cutoff,
        }),
        started,
    )?;
    match auc {
        Some(a) => println!("{name}: test AUC {a:.4}, accuracy {:.4}", m.accuracy),
        None => println!("{name}: accuracy {:.4} (AUC undefined)", m.accuracy),
    }
    Ok(())
}
