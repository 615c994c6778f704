//! Output collection: payload files are built in memory, hashed, written in
//! one pass, and listed in a manifest.
//!
//! Payload bytes depend only on the config and seed; the manifest
//! additionally records wall time, which is the one deliberately
//! nondeterministic field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub struct OutputWriter {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    experiment: String,
    master_seed: u64,
    artifact_version: &'static str,
    wall_time_s: f64,
    config_echo: &'a crate::config::RunConfig,
    files: Vec<ManifestFile>,
}

#[derive(Serialize)]
struct ManifestFile {
    name: String,
    bytes: usize,
    sha256: String,
}

impl OutputWriter {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Runtime(format!("serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// One JSON document per line.
    pub fn add_jsonl<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        for row in rows {
            serde_json::to_writer(&mut bytes, row)
                .map_err(|e| CliError::Runtime(format!("serialize {name}: {e}")))?;
            bytes.push(b'\n');
        }
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    pub fn add_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.files.push((name.to_string(), text.into_bytes()));
    }

    /// Write every collected file plus the manifest; returns the manifest
    /// file map for reporting.
    pub fn finish(
        self,
        config: &crate::config::RunConfig,
        wall_time_s: f64,
    ) -> Result<BTreeMap<String, String>, CliError> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Runtime(format!("create {}: {e}", self.dir.display())))?;
        let mut listed = Vec::new();
        let mut hashes = BTreeMap::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, bytes)
                .map_err(|e| CliError::Runtime(format!("write {}: {e}", path.display())))?;
            let digest = hex::encode(Sha256::digest(bytes));
            hashes.insert(name.clone(), digest.clone());
            listed.push(ManifestFile {
                name: name.clone(),
                bytes: bytes.len(),
                sha256: digest,
            });
        }
        let manifest = Manifest {
            schema_version: crate::config::SCHEMA_VERSION,
            experiment: config.experiment.to_string(),
            master_seed: config.master_seed,
            artifact_version: env!("CARGO_PKG_VERSION"),
            wall_time_s,
            config_echo: config,
            files: listed,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::Runtime(format!("serialize manifest: {e}")))?;
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Runtime(format!("write {}: {e}", path.display())))?;
        Ok(hashes)
    }
}

/// Format a float for CSV cells: shortest representation that parses back
/// to the same value.
pub fn csv_float(v: f64) -> String {
    format!("{v}")
}
