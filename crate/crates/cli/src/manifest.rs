//! Result manifests.
//!
//! Every command finishes by writing `manifest.json` next to its outputs.
//! The manifest records what was run and a SHA-256 checksum of each file,
//! and is written only after all outputs are complete: a directory without
//! a manifest holds an interrupted run. The schema is described in
//! `docs/manifest.md`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    /// Subcommand that produced the outputs: `run`, `sweep` or `mitigate`.
    pub command: String,
    /// Seed of the noise sampler, when the run drew random numbers.
    pub seed: Option<u64>,
    pub threads: usize,
    /// Start of the run in seconds since the Unix epoch.
    pub started_unix_s: u64,
    pub elapsed_s: f64,
    /// The fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the manifest's directory.
    pub path: String,
    /// `grid`, `series` or `json`.
    pub kind: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Collects output files and finally the manifest describing them.
#[derive(Debug)]
pub struct OutputWriter {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
    started: SystemTime,
    clock: Instant,
}

impl OutputWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, file_name: &str, kind: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(file_name), bytes)?;
        self.entries.push(OutputEntry {
            path: file_name.to_string(),
            kind: kind.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Writes the manifest and returns it with its path.
    pub fn finish(
        self,
        command: &str,
        seed: Option<u64>,
        config: serde_json::Value,
    ) -> Result<(Manifest, PathBuf)> {
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            tool: "rydchain".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            threads: rayon::current_num_threads(),
            started_unix_s: self
                .started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            elapsed_s: self.clock.elapsed().as_secs_f64(),
            config,
            outputs: self.entries,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        text.push(b'\n');
        write_atomic(&path, &text)?;
        Ok((manifest, path))
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Outputs whose file is missing or no longer matches its checksum.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|o| match fs::read(dir.join(&o.path)) {
                Ok(bytes) => bytes.len() as u64 != o.bytes || sha256_hex(&bytes) != o.sha256,
                Err(_) => true,
            })
            .map(|o| o.path.clone())
            .collect()
    }
}
