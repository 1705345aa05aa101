//! Run manifests: every command drops one JSON manifest next to its primary
//! output recording what ran, with which resolved configuration, over which
//! files. Re-running the same configuration reproduces the outputs
//! byte-for-byte (the manifest itself carries wall time, so it is the one
//! file that may differ).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 over the resolved command configuration (canonical JSON).
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub row_counts: BTreeMap<String, u64>,
    pub wall_time_seconds: f64,
    /// Command-specific extras (preset, per-feature ranges, …).
    pub details: serde_json::Value,
}

pub fn config_hash<T: Serialize>(config: &T) -> anyhow::Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex_digest(&bytes))
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Manifest path for a primary output: `<output>.manifest.json`.
pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let mut name = primary_output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(".manifest.json");
    primary_output.with_file_name(name)
}

pub fn write_manifest(primary_output: &Path, manifest: &RunManifest) -> anyhow::Result<()> {
    let path = manifest_path(primary_output);
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, text)?;
    Ok(())
}
