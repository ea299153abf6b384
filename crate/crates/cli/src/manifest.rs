use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use splitonn::Result;

/// Record of one command invocation, written next to its outputs. Replaying
/// it re-runs the same arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub seed: u64,
    pub threads: usize,
    /// Fully resolved configuration (model specs, training settings, data).
    pub config: serde_json::Value,
    /// Headline results, such as test accuracy or verification deviation.
    pub results: serde_json::Value,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, seed: u64, threads: usize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            argv,
            seed,
            threads,
            config: serde_json::Value::Null,
            results: serde_json::Value::Null,
            outputs: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    /// Writes `<dir>/<stem>.manifest.json` and returns its path.
    pub fn write(mut self, dir: &Path, stem: &str) -> Result<PathBuf> {
        self.finished_unix = unix_now();
        let path = dir.join(format!("{stem}.manifest.json"));
        std::fs::write(&path, serde_json::to_vec_pretty(&self)?)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Stored arguments with any `--out-dir` replaced by `out_dir`.
    pub fn replay_args(&self, out_dir: Option<&Path>) -> Vec<String> {
        let Some(dir) = out_dir else {
            return self.argv.clone();
        };
        let mut args = Vec::with_capacity(self.argv.len() + 2);
        let mut skip = false;
        for a in &self.argv {
            if skip {
                skip = false;
            } else if a == "--out-dir" {
                skip = true;
            } else if !a.starts_with("--out-dir=") {
                args.push(a.clone());
            }
        }
        args.push("--out-dir".into());
        args.push(dir.display().to_string());
        args
    }
}
