//! Run directories and their manifests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory.
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub overrides: Vec<String>,
    /// Resolved parameters, defaults included.
    pub snapshot: serde_json::Value,
    pub seed: Option<u64>,
    pub serial: bool,
    pub artifacts: Vec<Artifact>,
    pub wall_time_s: f64,
    pub version: String,
}

pub const MANIFEST: &str = "manifest.json";

/// Output directory of one command invocation.
pub struct Run {
    pub dir: PathBuf,
    pub emit_plot_data: bool,
    artifacts: Vec<PathBuf>,
    started: Instant,
}

impl Run {
    pub fn new(dir: PathBuf, emit_plot_data: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Internal(e.into()))?;
        Ok(Run { dir, emit_plot_data, artifacts: Vec::new(), started: Instant::now() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Register a file written by a library routine.
    pub fn record(&mut self, path: PathBuf) {
        if !self.artifacts.contains(&path) {
            self.artifacts.push(path);
        }
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| CliError::Internal(e.into()))?;
        self.record(p);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.into()))?;
        self.write_text(name, &(text + "\n"))
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).map_err(|e| CliError::Internal(e.into()))?;
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Internal(e.into()))?;
        }
        w.flush().map_err(|e| CliError::Internal(e.into()))?;
        self.record(p);
        Ok(())
    }

    /// Two-column whitespace table for external plotting, written only
    /// with `--emit-plot-data`.
    pub fn plot(&mut self, name: &str, header: [&str; 2], points: &[(f64, f64)]) -> Result<(), CliError> {
        if !self.emit_plot_data {
            return Ok(());
        }
        let mut text = format!("# {} {}\n", header[0], header[1]);
        for (x, y) in points {
            text.push_str(&format!("{x:.17e} {y:.17e}\n"));
        }
        self.write_text(&format!("plot_{name}.dat"), &text)
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf, CliError> {
        manifest.wall_time_s = self.started.elapsed().as_secs_f64();
        manifest.artifacts = self
            .artifacts
            .iter()
            .map(|p| {
                let bytes = std::fs::metadata(p).map(|m| m.len()).unwrap_or(0);
                let rel = p.strip_prefix(&self.dir).unwrap_or(p).to_string_lossy().into_owned();
                Artifact { path: rel, bytes }
            })
            .collect();
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.into()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Internal(e.into()))?;
        Ok(path)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, CliError> {
    let p = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
}
