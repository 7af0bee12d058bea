use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Run record written as `manifest.txt` next to a command's outputs.
#[derive(Debug, Default)]
pub struct Manifest {
    argv: Vec<String>,
    pub seed: Option<u64>,
    /// Resolved sampler configuration in config-file syntax.
    pub config: Option<String>,
    settings: Vec<(String, String)>,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<PathBuf>,
    pub wall_clock: Duration,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl Manifest {
    pub fn new(argv: Vec<String>) -> Self {
        Manifest {
            argv,
            ..Default::default()
        }
    }

    pub fn setting(&mut self, key: &str, value: &str) {
        self.settings.push((key.to_string(), value.to_string()));
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs.push((path.to_path_buf(), sha256_hex(&bytes)));
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let command = self.argv.get(1).map(String::as_str).unwrap_or("");
        let _ = writeln!(s, "command = {command}");
        let _ = writeln!(s, "argv = {}", self.argv.join(" "));
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        let _ = writeln!(s, "wall_clock_seconds = {:.3}", self.wall_clock.as_secs_f64());
        for (k, v) in &self.settings {
            let _ = writeln!(s, "{k} = {v}");
        }
        if let Some(cfg) = &self.config {
            s.push_str("\n[config]\n");
            s.push_str(cfg);
        }
        if !self.inputs.is_empty() {
            s.push_str("\n[inputs]\n");
            for (p, h) in &self.inputs {
                let _ = writeln!(s, "{} sha256={h}", p.display());
            }
        }
        s.push_str("\n[outputs]\n");
        for p in &self.outputs {
            let _ = writeln!(s, "{}", p.display());
        }
        s
    }
}
