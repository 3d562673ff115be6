//! Per-run manifest: what ran, with which configuration, on which bytes.
//!
//! Everything except the trailing `execution` and `timestamp` objects is a
//! pure function of the command, configuration and file contents.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Execution {
    pub workers: usize,
}

#[derive(Debug, Serialize)]
pub struct Timestamp {
    pub unix_seconds: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub cli_version: &'static str,
    pub library_version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub execution: Execution,
    pub timestamp: Timestamp,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, inputs: &[PathBuf], outputs: &[PathBuf]) -> std::io::Result<Self> {
        let digests = |paths: &[PathBuf]| -> std::io::Result<Vec<FileDigest>> {
            paths
                .iter()
                .map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: digest_path(p)? }))
                .collect()
        };
        Ok(Self {
            tool: "lmcurate",
            cli_version: env!("CARGO_PKG_VERSION"),
            library_version: lmcurate::VERSION,
            command: command.to_string(),
            seed: config.seed,
            config_sha256: config.digest(),
            config: config.clone(),
            inputs: digests(inputs)?,
            outputs: digests(outputs)?,
            execution: Execution { workers: config.workers },
            timestamp: Timestamp { unix_seconds: now() },
        })
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        fs::write(path, text)
    }
}

/// `SOURCE_DATE_EPOCH` pins the timestamp for fully reproducible manifests.
fn now() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

/// A file hashes its bytes; a directory hashes the sorted names and digests
/// of the files directly inside it.
pub fn digest_path(path: &Path) -> std::io::Result<String> {
    if path.is_dir() {
        let mut entries: Vec<(String, String)> = Vec::new();
        for entry in fs::read_dir(path)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                entries.push((entry.file_name().to_string_lossy().into_owned(), digest_path(&entry.path())?));
            }
        }
        entries.sort();
        let mut h = Sha256::new();
        for (name, d) in entries {
            h.update(name.as_bytes());
            h.update([0]);
            h.update(d.as_bytes());
            h.update(b"\n");
        }
        Ok(hex(&h.finalize()))
    } else {
        Ok(hex(&Sha256::digest(fs::read(path)?)))
    }
}
