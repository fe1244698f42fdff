//! Run manifests written next to every output.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliResult;
use crate::io::{sha256_file, write_json};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to repeat a run: tool version, the resolved
/// configuration, the master seed and digests of the inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub arguments: Vec<String>,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, master_seed: Option<u64>, started_unix: f64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            config,
            master_seed,
            threads: rayon::current_num_threads(),
            started_unix,
            finished_unix: started_unix,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(mut self, path: &Path) -> CliResult<()> {
        self.finished_unix = unix_now();
        write_json(path, &self)
    }
}
