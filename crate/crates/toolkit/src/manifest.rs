//! Run manifests: every artifact-producing command records what it ran on.
//!
//! The manifest carries content digests of all inputs, the seed, a digest of
//! the effective configuration, the tool version, and the wall-clock
//! duration. It is written next to the primary artifacts as
//! `manifest.json`; primary artifacts themselves stay byte-identical across
//! re-runs, the manifest's duration field is the one thing allowed to vary.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_digest: Option<String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub duration_ms: u64,
}

/// Collects manifest fields over the lifetime of one command.
pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_owned(),
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                seed,
                config_digest: None,
                inputs: BTreeMap::new(),
                outputs: Vec::new(),
                duration_ms: 0,
            },
            started: Instant::now(),
        }
    }

    /// Records an input file with its content digest.
    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        let digest = sha256_file(path)?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn config_text(&mut self, text: &str) {
        self.manifest.config_digest = Some(sha256_hex(text.as_bytes()));
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    /// Finalizes the manifest into `<out_dir>/manifest.json`.
    pub fn write(mut self, out_dir: &Path) -> anyhow::Result<()> {
        self.manifest.duration_ms = self.started.elapsed().as_millis() as u64;
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(out_dir.join("manifest.json"), text)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes =
        std::fs::read(path).map_err(|e| anyhow::anyhow!("digesting {}: {e}", path.display()))?;
    Ok(sha256_hex(&bytes))
}
