//! Run manifests: what was run, with which parameters, and the content hash
//! of every file it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gme_core::measure::fnv1a;
use gme_core::pipeline::ExperimentSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    /// Hex FNV-1a of the file bytes.
    pub fnv1a: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub spec: ExperimentSpec,
    pub artifacts: BTreeMap<String, Artifact>,
    pub root_seed: u64,
    pub toolkit_version: String,
    /// Not reproducible; excluded from [`RunManifest::fingerprint`].
    pub wall_time_seconds: f64,
    pub fingerprint: String,
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:016x}", fnv1a(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, spec: ExperimentSpec, wall_time_seconds: f64) -> Self {
        Self {
            command: command.to_string(),
            root_seed: spec.root_seed,
            spec,
            artifacts: BTreeMap::new(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds,
            fingerprint: String::new(),
        }
    }

    pub fn add(&mut self, name: &str, path: &Path) -> Result<()> {
        let artifact = Artifact { path: path.to_path_buf(), fnv1a: file_hash(path)? };
        self.artifacts.insert(name.to_string(), artifact);
        Ok(())
    }

    /// FNV-1a over command, spec, seed, version and artifact hashes.
    pub fn fingerprint(&self) -> String {
        let key = serde_json::json!({
            "command": self.command,
            "spec": self.spec,
            "artifacts": self.artifacts,
            "root_seed": self.root_seed,
            "toolkit_version": self.toolkit_version,
        });
        format!("{:016x}", fnv1a(key.to_string().as_bytes()))
    }

    /// Seals the fingerprint and writes pretty JSON.
    pub fn write(mut self, path: &Path) -> Result<Self> {
        self.fingerprint = self.fingerprint();
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Every listed file exists with its recorded hash, and the manifest
    /// fingerprint matches its contents.
    pub fn verify(&self) -> Result<()> {
        if self.fingerprint != self.fingerprint() {
            bail!("manifest fingerprint {} does not match its contents", self.fingerprint);
        }
        for (name, a) in &self.artifacts {
            let found = file_hash(&a.path)?;
            if found != a.fnv1a {
                bail!("artifact {name} ({}) hash {found}, manifest says {}", a.path.display(), a.fnv1a);
            }
        }
        Ok(())
    }
}

/// Manifest path for a file output: `<out>.run.json`.
pub fn beside(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}
