//! Experiment drivers: train on one feature map, evaluate on a held-out set
//! and scan the Werner families the model is meant to classify.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{evaluate, fit, DatasetMeta, FnnConfig, FnnModel, LabeledDataset, TrainingReport};
use crate::measure::{fixed_observable_devices, sample_device_set, DeviceSet, Layout};
use crate::pipeline::datasets::{DatasetKind, StateSet};
use crate::pipeline::features::{to_f32, FeatureMap};
use crate::pipeline::scan::{scan_werner, ScanReport, WernerFamily};
use crate::rng::derive_seed;
use crate::states::{balanced_graph, graph_state, is_connected};

/// Angle of the fixed second observable in the robustness study.
pub const FIXED_OBSERVABLE_PHI: f64 = 1.1055;

pub const FOUR_QUBIT_FAMILIES: [WernerFamily; 4] =
    [WernerFamily::Ghz4, WernerFamily::W4, WernerFamily::Cl4, WernerFamily::D24];

/// Scan digest without the per-point arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: WernerFamily,
    pub reported_threshold: f64,
    pub reference_threshold: f64,
    pub wrong_interval: Option<(f64, f64)>,
    pub accuracy_on_known: f64,
    pub known_points: usize,
}

impl From<&ScanReport> for FamilySummary {
    fn from(r: &ScanReport) -> Self {
        Self {
            family: r.family,
            reported_threshold: r.reported_threshold,
            reference_threshold: r.reference_threshold,
            wrong_interval: r.wrong_interval,
            accuracy_on_known: r.accuracy_on_known,
            known_points: r.known_points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub device_fingerprint: String,
    pub feature_dim: usize,
    pub train_rows: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub test_rows: usize,
    pub test_accuracy: f64,
    pub families: Vec<FamilySummary>,
}

impl RunReport {
    pub fn family(&self, family: WernerFamily) -> Option<&FamilySummary> {
        self.families.iter().find(|f| f.family == family)
    }
}

/// Trains `cfg` on `train`, evaluates on `test` and scans `families` in
/// their default conventions.
pub fn train_and_scan(
    label: &str,
    cfg: &FnnConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
    fm: &FeatureMap,
    families: &[WernerFamily],
    step: f64,
) -> Result<(FnnModel<f32>, TrainingReport, RunReport, Vec<ScanReport>)> {
    let (model, training) = fit::<f32>(cfg, train)?;
    let test_accuracy = evaluate(&model, test)?;
    let scans = families
        .iter()
        .map(|&f| scan_werner(&model, fm, f, f.default_convention(), step))
        .collect::<Result<Vec<_>>>()?;
    let report = RunReport {
        label: label.to_string(),
        device_fingerprint: fm.fingerprint(),
        feature_dim: fm.len(),
        train_rows: train.len(),
        best_epoch: training.best_epoch,
        epochs_run: training.epochs.len(),
        test_rows: test.len(),
        test_accuracy,
        families: scans.iter().map(FamilySummary::from).collect(),
    };
    Ok((model, training, report, scans))
}

fn require_kind(set: &StateSet, kinds: &[DatasetKind]) -> Result<()> {
    if !kinds.contains(&set.kind) {
        return Err(Error::OutOfRange(format!("state set of kind {:?}, expected one of {kinds:?}", set.kind)));
    }
    Ok(())
}

/// One 4-qubit run on fixed states: featurize with `fm`, train the preset
/// network and scan the four 4-qubit families.
pub fn four_qubit_run(
    label: &str,
    train: &StateSet,
    test: &StateSet,
    fm: &FeatureMap,
    model_seed: u64,
    step: f64,
) -> Result<RunReport> {
    require_kind(train, &[DatasetKind::Train4q])?;
    require_kind(test, &[DatasetKind::Test4q])?;
    let train_set = train.featurize(fm)?;
    let test_set = test.featurize(fm)?;
    let cfg = FnnConfig::preset(4, 2, fm.len(), model_seed)?;
    let (_, _, report, _) = train_and_scan(label, &cfg, &train_set, &test_set, fm, &FOUR_QUBIT_FAMILIES, step)?;
    Ok(report)
}

/// Retrains on `k`-correlation features from `k` fresh devices per qubit.
pub fn kcorr_experiment(
    k: usize,
    train: &StateSet,
    test: &StateSet,
    device_seed: u64,
    model_seed: u64,
    step: f64,
) -> Result<RunReport> {
    let devices = sample_device_set::<f64>(&[2; 4], k, device_seed)?;
    let fm = FeatureMap::kcorr(&devices, k)?;
    four_qubit_run(&format!("kcorr{k}"), train, test, &fm, model_seed, step)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub n: usize,
    pub k: usize,
    pub train: usize,
    pub test: usize,
    pub seed: u64,
}

impl GraphParams {
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        Self { n, k, train: 600, test: 200, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub params: GraphParams,
    pub device_fingerprint: String,
    pub feature_dim: usize,
    pub best_epoch: usize,
    pub train_connected: usize,
    pub test_connected: usize,
    pub test_accuracy: f64,
}

fn graph_rows(fm: &FeatureMap, n: usize, root: u64, range: std::ops::Range<u64>) -> Result<LabeledDataset> {
    let rows = range
        .into_par_iter()
        .map(|i| -> Result<(Vec<f32>, bool)> {
            let g = balanced_graph(n, root, i)?;
            let psi = graph_state::<f64>(&g)?;
            Ok((to_f32(&fm.pure(&psi)?), is_connected(&g)))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = rows.iter().map(|r| r.1).collect();
    let features = rows.into_iter().flat_map(|r| r.0).collect();
    let meta = DatasetMeta {
        device_fingerprint: fm.fingerprint(),
        dims: fm.devices.dims().to_vec(),
        layout: Some(fm.layout),
        root_seed: root,
        scale: 1.0,
        ..DatasetMeta::default()
    };
    LabeledDataset::new(fm.len(), features, labels, meta)
}

/// Graph-state study: connected graphs are GME, disconnected ones are not.
/// Train and test graphs are disjoint indices of one balanced ensemble.
pub fn graph_experiment(params: &GraphParams) -> Result<GraphReport> {
    if !(10..=12).contains(&params.n) {
        return Err(Error::OutOfRange(format!("graph study uses n in 10..=12, got {}", params.n)));
    }
    if params.k == 0 || params.train == 0 || params.test == 0 {
        return Err(Error::OutOfRange("graph study needs k, train and test ≥ 1".into()));
    }
    let devices = sample_device_set::<f64>(&vec![2; params.n], params.k, derive_seed(params.seed, 1))?;
    let fm = FeatureMap::kcorr(&devices, params.k)?;
    let root = derive_seed(params.seed, 2);
    let (n_train, n_test) = (params.train as u64, params.test as u64);
    let train = graph_rows(&fm, params.n, root, 0..n_train)?;
    let test = graph_rows(&fm, params.n, root, n_train..n_train + n_test)?;
    let cfg = FnnConfig::graph(fm.len(), derive_seed(params.seed, 3));
    let (model, training) = fit::<f32>(&cfg, &train)?;
    Ok(GraphReport {
        params: params.clone(),
        device_fingerprint: fm.fingerprint(),
        feature_dim: fm.len(),
        best_epoch: training.best_epoch,
        train_connected: train.positives(),
        test_connected: test.positives(),
        test_accuracy: evaluate(&model, &test)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
}

impl Spread {
    fn of(values: impl IntoIterator<Item = f64>) -> Self {
        values.into_iter().fold(Spread { min: f64::INFINITY, max: f64::NEG_INFINITY }, |s, v| Spread {
            min: s.min.min(v),
            max: s.max.max(v),
        })
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub random_runs: Vec<RunReport>,
    pub fixed_run: RunReport,
    /// Test accuracy over the random-device runs.
    pub test_spread: Spread,
    /// Per family, known-point accuracy over the random-device runs.
    pub family_spread: Vec<(WernerFamily, Spread)>,
}

/// Repeats the 4-qubit run on identical states under each random device
/// seed and under the fixed observables.
pub fn robustness_experiment(
    train: &StateSet,
    test: &StateSet,
    device_seeds: &[u64],
    model_seed: u64,
    step: f64,
) -> Result<RobustnessReport> {
    if device_seeds.is_empty() {
        return Err(Error::OutOfRange("robustness study needs at least one device seed".into()));
    }
    let mut random_runs = Vec::with_capacity(device_seeds.len());
    for &seed in device_seeds {
        let devices = sample_device_set::<f64>(&[2; 4], 2, seed)?;
        let fm = FeatureMap::full(&devices);
        random_runs.push(four_qubit_run(&format!("devices{seed}"), train, test, &fm, model_seed, step)?);
    }
    let fixed: DeviceSet<f64> = fixed_observable_devices(4, FIXED_OBSERVABLE_PHI)?;
    let fm = FeatureMap { devices: &fixed, layout: Layout::Full };
    let fixed_run = four_qubit_run("fixed_observables", train, test, &fm, model_seed, step)?;
    let test_spread = Spread::of(random_runs.iter().map(|r| r.test_accuracy));
    let family_spread = FOUR_QUBIT_FAMILIES
        .iter()
        .map(|&f| {
            let accs = random_runs.iter().filter_map(|r| r.family(f)).map(|s| s.accuracy_on_known);
            (f, Spread::of(accs))
        })
        .collect();
    Ok(RobustnessReport { random_runs, fixed_run, test_spread, family_spread })
}
