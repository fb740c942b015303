//! Labeled training and test sets. Every row is generated from its own
//! `(source, seed)` pair, so any row can be regenerated for auditing.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    concurrence_lower_bound, guhne3, is_npt, probe_search, tensor4_criterion, vrho, CriterionId, ProductProbe,
    PROBE_ACCEPT,
};
use crate::error::{Error, Result};
use crate::learn::{DatasetMeta, LabeledDataset};
use crate::pipeline::features::{to_f32, FeatureMap};
use crate::qcore::{embed_pad, random_density_with_dims, DensityMatrix};
use crate::rng::{derive_seed, substream, StreamRng};
use crate::states::{
    merge, sample_biseparable_from, sample_fully_separable_from, sample_intactness_from, sample_npt_bipartite,
};

/// Product probes tried per 4-qubit candidate.
pub const CONCURRENCE_PROBES: usize = 200;

/// Candidate cap for rejection sampling of one positive row.
const MAX_CANDIDATES: usize = 1_000_000;

/// Rows generated and featurized per parallel chunk; bounds peak memory
/// for 1024-dimensional states.
const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSource {
    /// Random state violating the 3-qubit biseparability inequality.
    Guhne3,
    /// Random 3-qubit state with a positive entropic bound.
    Vrho,
    /// Random 4-qubit state with a positive concurrence bound for some probe.
    Concurrence,
    /// Random 4-qubit state detected by the tensor-unfolding criterion.
    Tensor4,
    /// Merge of two NPT 4⊗2 states on (4,4,4).
    MergedNpt,
    /// Merge of two 4-qubit concurrence positives, padded to (4,4,4,4,4).
    MergedGme,
    FullySeparable,
    Biseparable,
    /// 3-separable mixture with some NPT pair block.
    Intactness3,
}

impl RowSource {
    pub fn is_positive(self) -> bool {
        matches!(
            self,
            RowSource::Guhne3
                | RowSource::Vrho
                | RowSource::Concurrence
                | RowSource::Tensor4
                | RowSource::MergedNpt
                | RowSource::MergedGme
        )
    }

    pub fn criterion(self) -> Option<CriterionId> {
        match self {
            RowSource::Guhne3 => Some(CriterionId::Guhne3),
            RowSource::Vrho => Some(CriterionId::Vrho),
            RowSource::Concurrence | RowSource::MergedGme => Some(CriterionId::ConcurrenceLb),
            RowSource::Tensor4 => Some(CriterionId::Tensor4),
            RowSource::MergedNpt => Some(CriterionId::Npt),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            RowSource::Guhne3 => "guhne3",
            RowSource::Vrho => "vrho",
            RowSource::Concurrence => "concurrence",
            RowSource::Tensor4 => "tensor4",
            RowSource::MergedNpt => "merged_npt",
            RowSource::MergedGme => "merged_gme",
            RowSource::FullySeparable => "fully_separable",
            RowSource::Biseparable => "biseparable",
            RowSource::Intactness3 => "intactness3",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        ALL_SOURCES
            .iter()
            .copied()
            .find(|s| s.tag() == tag)
            .ok_or_else(|| Error::Malformed(format!("unknown row source {tag:?}")))
    }

    fn code(self) -> u64 {
        ALL_SOURCES.iter().position(|&s| s == self).expect("listed") as u64 + 1
    }
}

const ALL_SOURCES: [RowSource; 9] = [
    RowSource::Guhne3,
    RowSource::Vrho,
    RowSource::Concurrence,
    RowSource::Tensor4,
    RowSource::MergedNpt,
    RowSource::MergedGme,
    RowSource::FullySeparable,
    RowSource::Biseparable,
    RowSource::Intactness3,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Train3q,
    Train4q,
    Train3qudit,
    Train5part,
    Test3q,
    Test4q,
    Test5part,
}

impl DatasetKind {
    /// Local dimensions of the features (after any padding).
    pub fn dims(self) -> Vec<usize> {
        match self {
            DatasetKind::Train3q | DatasetKind::Test3q => vec![2; 3],
            DatasetKind::Train4q | DatasetKind::Test4q => vec![2; 4],
            DatasetKind::Train3qudit => vec![4; 3],
            DatasetKind::Train5part | DatasetKind::Test5part => vec![4; 5],
        }
    }

    /// Devices per party used with this kind.
    pub fn devices_per_party(self) -> usize {
        match self {
            DatasetKind::Train3q | DatasetKind::Test3q | DatasetKind::Train4q | DatasetKind::Test4q => 2,
            _ => 3,
        }
    }

    /// Row counts at scale 1.
    pub fn counts(self) -> Vec<(RowSource, usize)> {
        use RowSource::*;
        match self {
            DatasetKind::Train3q => vec![(Guhne3, 30_000), (Biseparable, 20_000), (FullySeparable, 20_000)],
            DatasetKind::Train4q => {
                vec![(Concurrence, 30_000), (Biseparable, 20_000), (Intactness3, 20_000), (FullySeparable, 20_000)]
            }
            DatasetKind::Train3qudit => vec![(MergedNpt, 20_000), (Biseparable, 40_000)],
            DatasetKind::Train5part => vec![(MergedGme, 20_000), (Biseparable, 60_000)],
            DatasetKind::Test3q => vec![(Vrho, 600), (Biseparable, 200), (FullySeparable, 200)],
            DatasetKind::Test4q => vec![(Tensor4, 600), (Biseparable, 600)],
            DatasetKind::Test5part => vec![(MergedGme, 600), (Biseparable, 600)],
        }
    }

    fn namespace(self) -> u64 {
        match self {
            DatasetKind::Train3q => 0x3171,
            DatasetKind::Train4q => 0x4171,
            DatasetKind::Train3qudit => 0x3471,
            DatasetKind::Train5part => 0x5471,
            DatasetKind::Test3q => 0x3172,
            DatasetKind::Test4q => 0x4172,
            DatasetKind::Test5part => 0x5472,
        }
    }

    /// Dimensions states are sampled on before padding.
    fn sample_dims(self) -> Vec<usize> {
        match self {
            DatasetKind::Train5part | DatasetKind::Test5part => vec![2, 2, 4, 4, 4],
            k => k.dims(),
        }
    }
}

/// One planned row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowPlan {
    pub source: RowSource,
    pub seed: u64,
}

/// Rows of a dataset, positives first, each count scaled and rounded
/// (at least one row per class).
pub fn plan_rows(kind: DatasetKind, root_seed: u64, scale: f64) -> Result<Vec<RowPlan>> {
    if !(scale > 0.0) {
        return Err(Error::OutOfRange(format!("scale {scale}")));
    }
    let base = derive_seed(root_seed, kind.namespace());
    let mut rows = Vec::new();
    for (source, count) in kind.counts() {
        let n = ((count as f64 * scale).round() as usize).max(1);
        let class_root = derive_seed(base, source.code());
        rows.extend((0..n as u64).map(|j| RowPlan { source, seed: derive_seed(class_root, j) }));
    }
    Ok(rows)
}

fn random_candidate(dims: &[usize], rng: &mut StreamRng) -> Result<DensityMatrix<f64>> {
    let d: usize = dims.iter().product();
    let rank = rng.gen_range(1..=d);
    random_density_with_dims(dims, rank, rng)
}

fn rejection(
    dims: &[usize],
    rng: &mut StreamRng,
    mut accept: impl FnMut(&DensityMatrix<f64>, &mut StreamRng) -> Result<bool>,
) -> Result<DensityMatrix<f64>> {
    for _ in 0..MAX_CANDIDATES {
        let rho = random_candidate(dims, rng)?;
        if accept(&rho, rng)? {
            return Ok(rho);
        }
    }
    Err(Error::OutOfRange(format!("no accepted candidate on dims {dims:?}")))
}

/// 4-qubit candidate with the probe that certified it.
fn concurrence_positive(rng: &mut StreamRng) -> Result<(DensityMatrix<f64>, ProductProbe<f64>)> {
    for _ in 0..MAX_CANDIDATES {
        let rho = random_candidate(&[2; 4], rng)?;
        if let Some((probe, _)) = probe_search(&rho, CONCURRENCE_PROBES, rng)? {
            return Ok((rho, probe));
        }
    }
    Err(Error::OutOfRange("no 4-qubit concurrence positive found".into()))
}

fn certified(rho: &DensityMatrix<f64>, probe: &ProductProbe<f64>) -> Result<bool> {
    Ok(concurrence_lower_bound(rho, probe)?.margin > PROBE_ACCEPT)
}

/// Regenerates the state of one row on `kind`'s sampling dimensions.
pub fn generate_state(kind: DatasetKind, row: RowPlan) -> Result<DensityMatrix<f64>> {
    let dims = kind.sample_dims();
    let mut rng = substream(row.seed, 0);
    let rho = match row.source {
        RowSource::Guhne3 => rejection(&dims, &mut rng, |r, _| Ok(guhne3(r)?.detected))?,
        RowSource::Vrho => rejection(&dims, &mut rng, |r, _| Ok(vrho(r)?.detected))?,
        RowSource::Tensor4 => rejection(&dims, &mut rng, |r, _| Ok(tensor4_criterion(r)?.detected))?,
        RowSource::Concurrence => concurrence_positive(&mut rng)?.0,
        RowSource::MergedNpt => {
            let a = sample_npt_bipartite(&[4, 2], &mut rng)?;
            let b = sample_npt_bipartite(&[4, 2], &mut rng)?;
            merge(&a, &b, 1)?
        }
        RowSource::MergedGme => {
            let (a, _) = concurrence_positive(&mut rng)?;
            let (b, _) = concurrence_positive(&mut rng)?;
            merge(&a, &b, 3)?
        }
        RowSource::FullySeparable => sample_fully_separable_from(&dims, &mut rng)?,
        RowSource::Biseparable => sample_biseparable_from(&dims, &mut rng)?,
        RowSource::Intactness3 => sample_intactness_from(&dims, 3, &mut rng)?,
    };
    let target = kind.dims();
    if rho.dims() != target.as_slice() {
        return embed_pad(&rho, &target);
    }
    Ok(rho)
}

fn meta_for(kind: DatasetKind, rows: &[RowPlan], fm: &FeatureMap, root_seed: u64, scale: f64) -> DatasetMeta {
    let mut criteria: Vec<CriterionId> = Vec::new();
    for r in rows {
        if let Some(c) = r.source.criterion() {
            if !criteria.contains(&c) {
                criteria.push(c);
            }
        }
    }
    DatasetMeta {
        device_fingerprint: fm.fingerprint(),
        dims: kind.dims(),
        layout: Some(fm.layout),
        criteria,
        root_seed,
        scale,
        seeds: rows.iter().map(|r| r.seed).collect(),
        sources: rows.iter().map(|r| r.source.tag().to_string()).collect(),
    }
}

fn check_devices(kind: DatasetKind, fm: &FeatureMap) -> Result<()> {
    if fm.devices.dims() != kind.dims().as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "{kind:?} needs devices on {:?}, got {:?}",
            kind.dims(),
            fm.devices.dims()
        )));
    }
    Ok(())
}

/// Generates and featurizes every planned row, in parallel chunks.
pub fn build_dataset(kind: DatasetKind, root_seed: u64, scale: f64, fm: &FeatureMap) -> Result<LabeledDataset> {
    check_devices(kind, fm)?;
    let rows = plan_rows(kind, root_seed, scale)?;
    let dim = fm.len();
    let mut features = Vec::with_capacity(rows.len() * dim);
    for chunk in rows.chunks(CHUNK) {
        let part: Vec<Vec<f32>> =
            chunk.par_iter().map(|&row| Ok(to_f32(&fm.dense(&generate_state(kind, row)?)?))).collect::<Result<_>>()?;
        for p in part {
            features.extend(p);
        }
    }
    let labels = rows.iter().map(|r| r.source.is_positive()).collect();
    LabeledDataset::new(dim, features, labels, meta_for(kind, &rows, fm, root_seed, scale))
}

/// States of a dataset held in memory, for re-featurizing under several
/// device sets (only sensible for small local spaces).
#[derive(Clone, Debug)]
pub struct StateSet {
    pub kind: DatasetKind,
    pub root_seed: u64,
    pub scale: f64,
    pub rows: Vec<RowPlan>,
    pub states: Vec<DensityMatrix<f64>>,
}

pub fn sample_states(kind: DatasetKind, root_seed: u64, scale: f64) -> Result<StateSet> {
    let rows = plan_rows(kind, root_seed, scale)?;
    let states = rows.par_iter().map(|&row| generate_state(kind, row)).collect::<Result<Vec<_>>>()?;
    Ok(StateSet { kind, root_seed, scale, rows, states })
}

impl StateSet {
    pub fn featurize(&self, fm: &FeatureMap) -> Result<LabeledDataset> {
        check_devices(self.kind, fm)?;
        let part: Vec<Vec<f32>> =
            self.states.par_iter().map(|rho| Ok(to_f32(&fm.dense(rho)?))).collect::<Result<_>>()?;
        let labels = self.rows.iter().map(|r| r.source.is_positive()).collect();
        let meta = meta_for(self.kind, &self.rows, fm, self.root_seed, self.scale);
        LabeledDataset::new(fm.len(), part.concat(), labels, meta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    pub label_agreements: usize,
    pub feature_agreements: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.label_agreements == self.checked && self.feature_agreements == self.checked
    }
}

/// Re-labels a random `fraction` of rows from scratch: the state is
/// regenerated from its stored seed, positives are re-checked by their
/// generating criterion, and features are recomputed.
pub fn audit_dataset(
    kind: DatasetKind,
    data: &LabeledDataset,
    fm: &FeatureMap,
    fraction: f64,
    seed: u64,
) -> Result<AuditReport> {
    if data.meta.seeds.len() != data.len() || data.meta.sources.len() != data.len() {
        return Err(Error::Malformed("dataset lacks per-row seeds and sources".into()));
    }
    let n = ((data.len() as f64 * fraction).ceil() as usize).clamp(1, data.len());
    let picked = sample(&mut substream(seed, 0), data.len(), n).into_vec();
    let results = picked
        .par_iter()
        .map(|&i| -> Result<(bool, bool)> {
            let source = RowSource::from_tag(&data.meta.sources[i])?;
            let row = RowPlan { source, seed: data.meta.seeds[i] };
            let rho = generate_state(kind, row)?;
            let label = if source.is_positive() { relabel(kind, row)? } else { false };
            let feats = to_f32(&fm.dense(&rho)?);
            Ok((label == data.labels()[i], feats.as_slice() == data.row(i)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AuditReport {
        checked: n,
        label_agreements: results.iter().filter(|r| r.0).count(),
        feature_agreements: results.iter().filter(|r| r.1).count(),
    })
}

/// Independent re-check of a positive row by its criterion.
fn relabel(kind: DatasetKind, row: RowPlan) -> Result<bool> {
    let mut rng = substream(row.seed, 0);
    Ok(match row.source {
        RowSource::Guhne3 => guhne3(&generate_state(kind, row)?)?.detected,
        RowSource::Vrho => vrho(&generate_state(kind, row)?)?.detected,
        RowSource::Tensor4 => tensor4_criterion(&generate_state(kind, row)?)?.detected,
        RowSource::Concurrence => {
            let (rho, probe) = concurrence_positive(&mut rng)?;
            certified(&rho, &probe)?
        }
        RowSource::MergedNpt => {
            let a = sample_npt_bipartite::<f64, _>(&[4, 2], &mut rng)?;
            let b = sample_npt_bipartite::<f64, _>(&[4, 2], &mut rng)?;
            is_npt(&a, &[1])?.detected && is_npt(&b, &[1])?.detected
        }
        RowSource::MergedGme => {
            let (a, pa) = concurrence_positive(&mut rng)?;
            let (b, pb) = concurrence_positive(&mut rng)?;
            certified(&a, &pa)? && certified(&b, &pb)?
        }
        _ => false,
    })
}
