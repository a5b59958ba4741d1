//! Run manifests: a config snapshot with a content hash so reruns are
//! verifiable. Wall time is recorded but excluded from the hashed content.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    format_version: u32,
    tool_version: &'a str,
    command: &'a str,
    config: serde_json::Value,
    content_hash: String,
    wall_time_secs: f64,
}

pub fn write_manifest(
    path: &Path,
    command: &str,
    config: serde_json::Value,
    started: Instant,
) -> Result<(), CliError> {
    let tool_version = env!("CARGO_PKG_VERSION");
    let hashed = serde_json::json!({
        "format_version": MANIFEST_FORMAT_VERSION,
        "tool_version": tool_version,
        "command": command,
        "config": config,
    });
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(&hashed).expect("hashable content").as_bytes());
    let digest = hasher.finalize();
    let content_hash = digest.iter().map(|b| format!("{b:02x}")).collect();

    let manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        tool_version,
        command,
        config,
        content_hash,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(path, json).map_err(CliError::runtime)
}
