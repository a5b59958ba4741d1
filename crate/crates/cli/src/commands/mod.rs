mod build_dataset;
mod evaluate;
mod generate;
mod plot;
mod pretrain_cmd;
mod simulate;
mod sweep;
mod train;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "outbreak",
    version,
    about = "Stochastic SIR spreading on networks and early take-off/die-out prediction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a contact network and write it as an edge list.
    Generate(generate::GenerateArgs),
    /// Run a batch of stochastic SIR simulations.
    Simulate(simulate::SimulateArgs),
    /// Turn simulated trajectories into a labeled, split dataset.
    BuildDataset(build_dataset::BuildDatasetArgs),
    /// Train a neural predictor and write a checkpoint.
    Train(train::TrainArgs),
    /// Evaluate a model or checkpoint on a dataset's test split.
    Evaluate(evaluate::EvaluateArgs),
    /// Retrain and evaluate models across observation times.
    Sweep(sweep::SweepArgs),
    /// Pretrain one OGWN on a multi-scenario simulation grid.
    Pretrain(pretrain_cmd::PretrainArgs),
    /// Finetune a pretrained checkpoint on a held-out network.
    Finetune(pretrain_cmd::FinetuneArgs),
    /// Render a metrics, histogram, or ROC file as an SVG chart.
    Plot(plot::PlotArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => generate::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::BuildDataset(args) => build_dataset::run(args),
        Command::Train(args) => train::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Pretrain(args) => pretrain_cmd::run_pretrain(args),
        Command::Finetune(args) => pretrain_cmd::run_finetune(args),
        Command::Plot(args) => plot::run(args),
    }
}

/// Read and parse a TOML config file.
pub(crate) fn read_toml<T: serde::de::DeserializeOwned>(
    path: &std::path::Path,
) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))
}

/// "a,b,c" integer lists for flags.
pub(crate) fn parse_u32_list(s: &str) -> Result<Vec<u32>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| e.to_string()))
        .collect()
}

/// "0.8,0.1,0.1" split ratios.
pub(crate) fn parse_ratios(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 3 {
        return Err(format!("expected three ratios, got {}", parts.len()));
    }
    Ok((parts[0], parts[1], parts[2]))
}

/// Report every missing setting at once.
pub(crate) fn require_all(missing: Vec<&'static str>) -> Result<(), CliError> {
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "missing required settings: {}",
            missing.join(", ")
        )))
    }
}

pub(crate) fn load_graph(path: &std::path::Path) -> Result<outbreak_core::netgen::Graph, CliError> {
    outbreak_core::netgen::load_edge_list(path).map_err(CliError::validation)
}
