//! Shared heavy fixtures for unit tests. Computed once per test process.

use std::sync::OnceLock;

use crate::netgen::{generate_ba, Graph};
use crate::sim::{run_batch, BatchResult, SimConfig, SirParams};

/// BA(2000, m=3) medium-infectivity batch: beta=0.02, mu=0.05, 20000 runs.
/// Strongly bimodal. Used by histogram, labeling, and dataset tests.
pub fn ba_medium_batch() -> &'static BatchResult {
    static BATCH: OnceLock<BatchResult> = OnceLock::new();
    BATCH.get_or_init(|| {
        let g = ba_medium_graph();
        let params = SirParams::new(0.02, 0.05).unwrap();
        let config = SimConfig::new(4242);
        run_batch(g, &params, &config, 20_000).unwrap()
    })
}

pub fn ba_medium_graph() -> &'static Graph {
    static GRAPH: OnceLock<Graph> = OnceLock::new();
    GRAPH.get_or_init(|| generate_ba(2000, 3, 17).unwrap())
}
