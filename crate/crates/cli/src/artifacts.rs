use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use fdd_core::io::{write_field, write_pgm16, Layout};
use fdd_core::RealField;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Collects everything a command writes under `--out` so the manifest can
/// list digests.
pub struct Artifacts {
    root: PathBuf,
    written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct ArtifactEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Seeds {
    base: u64,
    trials: u64,
    derivation: &'static str,
    validation: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a ExperimentConfig,
    seeds: Seeds,
    artifacts: Vec<ArtifactEntry>,
}

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "resolved_config.json";

impl Artifacts {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, content)?;
        self.written.push(p);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(fdd_core::FddError::from)?;
        s.push('\n');
        self.text(name, &s)
    }

    /// `<name>` as raw f32 plus its JSON sidecar.
    pub fn field(&mut self, name: &str, field: &RealField, layout: Layout, units: &str) -> Result<(), CliError> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        write_field(&p, field, layout, units)?;
        self.written.push(p.with_extension("json"));
        self.written.push(p);
        Ok(())
    }

    pub fn preview(&mut self, name: &str, field: &RealField) -> Result<(), CliError> {
        let p = self.path(name);
        write_pgm16(&p, &field.values, field.grid.nx, field.grid.ny)?;
        self.written.push(p);
        Ok(())
    }

    pub fn adopt(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.written.extend(paths);
    }

    /// Write the resolved config and the manifest. Artifacts are listed in
    /// path order so the manifest itself is reproducible.
    pub fn finish(mut self, command: &str, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
        self.json(RESOLVED_CONFIG, config)?;
        let mut paths = self.written.clone();
        paths.sort();
        paths.dedup();
        let mut artifacts = Vec::with_capacity(paths.len());
        for p in paths {
            let bytes = fs::read(&p)?;
            let rel = p.strip_prefix(&self.root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            artifacts.push(ArtifactEntry { path: rel, bytes: bytes.len() as u64, sha256: hex::encode(Sha256::digest(&bytes)) });
        }
        let manifest = Manifest {
            tool: "fdd",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            seeds: Seeds {
                base: config.acquisition.seed,
                trials: config.acquisition.trials,
                derivation: "frame seed = mix_seed(base, frame, trial), splitmix64 chain",
                validation: config.validation.seed,
            },
            artifacts,
        };
        let p = self.path(MANIFEST);
        let mut s = serde_json::to_string_pretty(&manifest).map_err(fdd_core::FddError::from)?;
        s.push('\n');
        fs::write(&p, s)?;
        Ok(p)
    }
}
