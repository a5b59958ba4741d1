use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use outbreak_core::dataset::auto_phi_star;
use outbreak_core::sim::{
    estimate_dieout_prob, final_size_histogram, run_batch, SeedSelection, SimConfig, SirParams,
};
use serde::Deserialize;

use super::{load_graph, require_all};
use crate::error::CliError;
use crate::manifest::write_manifest;

#[derive(Args)]
pub struct SimulateArgs {
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
    #[arg(long)]
    pub max_steps: Option<u32>,
    #[arg(long)]
    pub initial_infected: Option<u32>,
    /// Start every run from this node instead of a uniform draw.
    #[arg(long)]
    pub seed_node: Option<u32>,
    /// Also estimate the die-out probability below this threshold.
    #[arg(long)]
    pub phi_star: Option<u32>,
    /// Derive the threshold from the histogram valley.
    #[arg(long)]
    pub auto_phi: bool,
    #[arg(long)]
    pub bin_width: Option<u32>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    graph: Option<PathBuf>,
    beta: Option<f64>,
    mu: Option<f64>,
    runs: Option<u64>,
    seed: Option<u64>,
    max_steps: Option<u32>,
    initial_infected: Option<u32>,
    seed_node: Option<u32>,
    phi_star: Option<u32>,
    auto_phi: Option<bool>,
    bin_width: Option<u32>,
    out_dir: Option<PathBuf>,
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let file: SimulateFile = match &args.config {
        Some(path) => super::read_toml(path)?,
        None => SimulateFile::default(),
    };
    let graph_path = args.graph.or(file.graph);
    let beta = args.beta.or(file.beta);
    let mu = args.mu.or(file.mu);
    let runs = args.runs.or(file.runs);
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
    if out_dir.is_none() {
        missing.push("out_dir");
    }
    require_all(missing)?;
    let (graph_path, beta, mu, runs, out_dir) = (
        graph_path.expect("checked"),
        beta.expect("checked"),
        mu.expect("checked"),
        runs.expect("checked"),
        out_dir.expect("checked"),
    );
    let seed = args.seed.or(file.seed).unwrap_or(1);
    let auto_phi = args.auto_phi || file.auto_phi.unwrap_or(false);
    let phi_star = args.phi_star.or(file.phi_star);

    let graph = load_graph(&graph_path)?;
    let params = SirParams::new(beta, mu).map_err(CliError::validation)?;
    let mut config = SimConfig::new(seed);
    if let Some(ms) = args.max_steps.or(file.max_steps) {
        config.max_steps = ms;
    }
    if let Some(i0) = args.initial_infected.or(file.initial_infected) {
        config.initial_infected = i0;
    }
    if let Some(node) = args.seed_node.or(file.seed_node) {
        config.seed_selection = SeedSelection::FixedNode { id: node };
    }

    std::fs::create_dir_all(&out_dir).map_err(CliError::runtime)?;
    let batch = run_batch(&graph, &params, &config, runs).map_err(CliError::validation)?;
    let sizes = batch.final_sizes();

    let traj_path = out_dir.join("trajectories.jsonl");
    batch.save_jsonl(&traj_path).map_err(CliError::runtime)?;

    let bin_width = args
        .bin_width
        .or(file.bin_width)
        .unwrap_or_else(|| ((graph.n() / 100) as u32).max(1));
    let hist = final_size_histogram(&sizes, graph.n(), bin_width).map_err(CliError::validation)?;
    let hist_path = out_dir.join("histogram.csv");
    let mut csv = String::from("# outbreak-histogram v1\nbin_start,count\n");
    for (bin, count) in hist.counts.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", hist.bin_start(bin), count));
    }
    std::fs::write(&hist_path, csv).map_err(CliError::runtime)?;

    let resolved_phi = if auto_phi {
        Some(auto_phi_star(&sizes, graph.n()).map_err(CliError::validation)?)
    } else {
        phi_star
    };
    if let Some(phi) = resolved_phi {
        let p = estimate_dieout_prob(&sizes, graph.n(), phi).map_err(CliError::validation)?;
        let path = out_dir.join("dieout.csv");
        std::fs::write(&path, format!("# outbreak-scalar v1\ndieout_prob\n{p}\n"))
            .map_err(CliError::runtime)?;
        println!("die-out probability below {phi}: {p:.4}");
    }

    write_manifest(
        &out_dir.join("manifest.json"),
        "simulate",
        serde_json::json!({
            "graph": graph_path,
            "graph_hash": graph.content_hash(),
            "beta": beta,
            "mu": mu,
            "runs": runs,
            "seed": seed,
            "max_steps": config.max_steps,
            "initial_infected": config.initial_infected,
            "seed_selection": config.seed_selection,
            "phi_star": resolved_phi,
            "bin_width": bin_width,
        }),
        started,
    )?;
    println!(
        "wrote {} runs to {} (mean final size {:.1})",
        runs,
        traj_path.display(),
        sizes.iter().map(|&s| s as f64).sum::<f64>() / sizes.len() as f64
    );
    Ok(())
}
