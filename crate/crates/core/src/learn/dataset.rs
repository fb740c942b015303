use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criteria::CriterionId;
use crate::error::{Error, Result};
use crate::measure::Layout;

/// Provenance of one dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Hex FNV-1a fingerprint of the device file used for the features.
    pub device_fingerprint: String,
    pub dims: Vec<usize>,
    pub layout: Option<Layout>,
    pub criteria: Vec<CriterionId>,
    pub root_seed: u64,
    pub scale: f64,
    /// Per-row generator seed.
    pub seeds: Vec<u64>,
    /// Per-row generator tag, e.g. `guhne3` or `intactness3`.
    pub sources: Vec<String>,
}

/// Feature rows in `[0, 1]` with binary GME labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f32>,
    labels: Vec<bool>,
    pub meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    n: usize,
    dim: usize,
    labels: Vec<u8>,
    device_fingerprint: String,
    layout: Option<Layout>,
    seeds: Vec<u64>,
    sources: Vec<String>,
    dims: Vec<usize>,
    criteria: Vec<CriterionId>,
    root_seed: u64,
    scale: f64,
    positives: usize,
    negatives: usize,
    features_file: String,
}

impl LabeledDataset {
    pub fn new(dim: usize, features: Vec<f32>, labels: Vec<bool>, meta: DatasetMeta) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("feature dimension 0".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature values for {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(v) = features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("feature value {v} outside [0, 1]")));
        }
        for (what, len) in [("seeds", meta.seeds.len()), ("sources", meta.sources.len())] {
            if len != 0 && len != labels.len() {
                return Err(Error::DimensionMismatch(format!("{len} {what} for {} rows", labels.len())));
            }
        }
        Ok(Self { dim, features, labels, meta })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    /// Rows `idx`, in that order, with matching per-row metadata.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        let pick = |v: &[u64]| if v.is_empty() { Vec::new() } else { idx.iter().map(|&i| v[i]).collect() };
        let mut meta = self.meta.clone();
        meta.seeds = pick(&self.meta.seeds);
        meta.sources = if self.meta.sources.is_empty() {
            Vec::new()
        } else {
            idx.iter().map(|&i| self.meta.sources[i].clone()).collect()
        };
        Self { dim: self.dim, features, labels: idx.iter().map(|&i| self.labels[i]).collect(), meta }
    }

    /// Sibling raw-feature path of a manifest.
    pub fn features_path(manifest: &Path) -> PathBuf {
        manifest.with_extension("f32")
    }

    /// Writes the JSON manifest at `path` and little-endian `f32` rows next
    /// to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw = Self::features_path(path);
        let manifest = Manifest {
            n: self.len(),
            dim: self.dim,
            labels: self.labels.iter().map(|&y| y as u8).collect(),
            device_fingerprint: self.meta.device_fingerprint.clone(),
            layout: self.meta.layout,
            seeds: self.meta.seeds.clone(),
            sources: self.meta.sources.clone(),
            dims: self.meta.dims.clone(),
            criteria: self.meta.criteria.clone(),
            root_seed: self.meta.root_seed,
            scale: self.meta.scale,
            positives: self.positives(),
            negatives: self.len() - self.positives(),
            features_file: raw.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        let mut w = BufWriter::new(File::create(&raw)?);
        for v in &self.features {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        std::fs::write(path, serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let m: Manifest = serde_json::from_slice(&std::fs::read(path)?)?;
        if m.labels.len() != m.n {
            return Err(Error::Malformed(format!("manifest lists {} labels for n = {}", m.labels.len(), m.n)));
        }
        let raw = path.with_file_name(&m.features_file);
        let mut bytes = Vec::new();
        BufReader::new(File::open(&raw)?).read_to_end(&mut bytes)?;
        if bytes.len() != m.n * m.dim * 4 {
            return Err(Error::Malformed(format!(
                "{} holds {} bytes, expected {}",
                raw.display(),
                bytes.len(),
                m.n * m.dim * 4
            )));
        }
        let features = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let labels = m
            .labels
            .iter()
            .map(|&y| match y {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Malformed(format!("label {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let meta = DatasetMeta {
            device_fingerprint: m.device_fingerprint,
            dims: m.dims,
            layout: m.layout,
            criteria: m.criteria,
            root_seed: m.root_seed,
            scale: m.scale,
            seeds: m.seeds,
            sources: m.sources,
        };
        Self::new(m.dim, features, labels, meta)
    }
}
