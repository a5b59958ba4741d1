use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use outbreak_core::dataset::{build_dataset, LabelingConfig};
use outbreak_core::sim::BatchResult;

use super::parse_ratios;
use crate::error::CliError;
use crate::manifest::write_manifest;

#[derive(Args)]
pub struct BuildDatasetArgs {
    /// Trajectory JSONL produced by `simulate`.
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Observation horizon (steps visible to the models).
    #[arg(long)]
    pub t_o: u32,
    #[arg(long, conflicts_with = "auto_phi")]
    pub phi_star: Option<u32>,
    #[arg(long)]
    pub auto_phi: bool,
    #[arg(long, value_parser = parse_ratios, default_value = "0.8,0.1,0.1")]
    pub split: (f64, f64, f64),
    #[arg(long, default_value_t = 7)]
    pub split_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: BuildDatasetArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let labeling = if args.auto_phi {
        LabelingConfig::auto()
    } else {
        match args.phi_star {
            Some(p) => LabelingConfig::fixed(p),
            None => {
                return Err(CliError::Usage(
                    "choose --phi-star <N> or --auto-phi".into(),
                ))
            }
        }
    };
    let batch = BatchResult::load_jsonl(&args.trajectories).map_err(CliError::validation)?;
    let dataset = build_dataset(&batch, args.t_o, &labeling, args.split, args.split_seed)
        .map_err(CliError::validation)?;
    dataset.save_jsonl(&args.out).map_err(CliError::runtime)?;
    write_manifest(
        &args.out.with_extension("manifest.json"),
        "build-dataset",
        serde_json::json!({
            "trajectories": args.trajectories,
            "t_o": args.t_o,
            "provenance": dataset.provenance,
            "samples": dataset.len(),
        }),
        started,
    )?;
    println!(
        "wrote {} samples (phi_star {}, positive fraction {:.4}) to {}",
        dataset.len(),
        dataset.provenance.phi_star,
        dataset.positive_fraction(),
        args.out.display()
    );
    Ok(())
}
