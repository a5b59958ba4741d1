use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use outbreak_core::netgen::NetworkSpec;

use crate::error::CliError;
use crate::manifest::write_manifest;

#[derive(Args)]
pub struct GenerateArgs {
    /// Erdős–Rényi by target mean degree.
    #[arg(long, conflicts_with = "ba")]
    pub er: bool,
    /// Barabási–Albert preferential attachment.
    #[arg(long)]
    pub ba: bool,
    #[arg(long)]
    pub n: usize,
    /// Target mean degree (ER).
    #[arg(long)]
    pub k: Option<f64>,
    /// Attachment parameter (BA).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: GenerateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let spec = match (args.er, args.ba) {
        (true, false) => NetworkSpec::Er {
            n: args.n,
            avg_degree: args.k.ok_or_else(|| {
                CliError::Usage("--er requires --k (target mean degree)".into())
            })?,
            rng_seed: args.seed,
        },
        (false, true) => NetworkSpec::Ba {
            n: args.n,
            m: args
                .m
                .ok_or_else(|| CliError::Usage("--ba requires --m".into()))?,
            rng_seed: args.seed,
        },
        _ => {
            return Err(CliError::Usage(
                "choose exactly one of --er or --ba".into(),
            ))
        }
    };
    let graph = spec.realize().map_err(CliError::validation)?;
    std::fs::write(&args.out, graph.to_edge_list_string()).map_err(CliError::runtime)?;
    write_manifest(
        &args.out.with_extension("manifest.json"),
        "generate",
        serde_json::json!({
            "network": spec,
            "out": args.out,
            "graph_hash": graph.content_hash(),
            "nodes": graph.n(),
            "edges": graph.edge_count(),
        }),
        started,
    )?;
    println!(
        "wrote {} ({} nodes, {} edges, mean degree {:.3})",
        args.out.display(),
        graph.n(),
        graph.edge_count(),
        graph.mean_degree()
    );
    Ok(())
}
