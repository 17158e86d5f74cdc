//! Run manifests: every output directory (or file sibling) records the
//! command line, the full configuration, the master seed, input digests, and
//! the wall-clock runtime, so a run can be reproduced bit-for-bit.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use digft::error::{Error, Result};
use sha2::{Digest, Sha256};

pub struct ManifestBuilder {
    command: &'static str,
    argv: Vec<String>,
    master_seed: u64,
    jobs: usize,
    config: serde_json::Value,
    input_digests: BTreeMap<String, String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &'static str, master_seed: u64, jobs: usize) -> Self {
        ManifestBuilder {
            command,
            argv: std::env::args().collect(),
            master_seed,
            jobs,
            config: serde_json::Value::Null,
            input_digests: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    pub fn set_config(&mut self, config: serde_json::Value) {
        self.config = config;
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.input_digests.insert(path.display().to_string(), hex);
        Ok(())
    }

    fn render(&self) -> String {
        let manifest = serde_json::json!({
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "master_seed": self.master_seed,
            "jobs": self.jobs,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "input_digests": self.input_digests,
            "runtime_seconds": self.started.elapsed().as_secs_f64(),
        });
        serde_json::to_string_pretty(&manifest).expect("manifest serializes")
    }

    /// Writes `manifest.json` inside an output directory.
    pub fn write_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("manifest.json");
        std::fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))
    }

    /// Writes `<file>.manifest.json` next to an output file.
    pub fn write_sibling(&self, out_file: &Path) -> Result<()> {
        let mut name = out_file
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "out".to_string());
        name.push_str(".manifest.json");
        let path = out_file.with_file_name(name);
        std::fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))
    }
}
