//! Run manifests: every command writes one, and any run can be repeated
//! bit-identically from it (timestamps aside).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved configuration; sufficient to reproduce the run.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub started_at: String,
    pub finished_at: String,
    /// Output files relative to the run directory, sorted.
    pub outputs: Vec<String>,
    /// SHA-256 over the output files' bytes in listed order.
    pub artifact_hash: String,
}

pub fn now_rfc3339() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_else(|_| "unknown".into())
}

/// Collects every regular file under `dir` (except the manifest itself),
/// hashes them in sorted order and writes `manifest.json`.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    config: serde_json::Value,
    seeds: &[u64],
    started_at: String,
) -> Result<(), CliError> {
    let mut outputs = Vec::new();
    collect_files(dir, dir, &mut outputs)?;
    outputs.retain(|p| p != "manifest.json");
    outputs.sort();
    let mut hasher = Sha256::new();
    for rel in &outputs {
        hasher.update(rel.as_bytes());
        hasher.update(std::fs::read(dir.join(rel))?);
    }
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        seeds: seeds.to_vec(),
        started_at,
        finished_at: now_rfc3339(),
        outputs,
        artifact_hash: format!("{:x}", hasher.finalize()),
    };
    let body = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), body)?;
    Ok(())
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), CliError> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&body).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Prepares a run directory, erroring only on unwritable paths.
pub fn ensure_run_dir(dir: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}
