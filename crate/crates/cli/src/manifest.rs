use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Record of one command run, written as `key=value` lines.
#[derive(Clone, Debug, Default)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    /// `(file name, sha256 hex)` in emission order.
    pub files: Vec<(String, String)>,
    /// Extra timing entries such as per-estimator wall times.
    pub timings: Vec<(String, Duration)>,
    pub wall_time: Duration,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            seed: cfg.seed,
            config: cfg.echo(),
            ..Default::default()
        }
    }

    /// Digests `dir/name` and appends it to the file list.
    pub fn add_file(&mut self, dir: &Path, name: &str) -> Result<()> {
        let digest = sha256_file(&dir.join(name))?;
        self.files.push((name.to_string(), digest));
        Ok(())
    }

    pub fn digest(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "seed={}", self.seed);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k}={v}");
        }
        let names: Vec<&str> = self.files.iter().map(|(n, _)| n.as_str()).collect();
        let _ = writeln!(s, "files={}", names.join(","));
        for (name, digest) in &self.files {
            let _ = writeln!(s, "sha256.{name}={digest}");
        }
        for (k, d) in &self.timings {
            let _ = writeln!(s, "wall_time.{k}={}", d.as_secs_f64());
        }
        let _ = writeln!(s, "wall_time={}", self.wall_time.as_secs_f64());
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_text()).map_err(|e| CliError::io(path, e))
    }
}

/// Parses manifest text into ordered `(key, value)` pairs.
pub fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
