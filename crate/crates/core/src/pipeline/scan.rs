//! Noise-parameter scans of a trained classifier. Features are linear in the
//! state, so each scan featurizes its pure components once and mixes the
//! feature vectors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::vrho;
use crate::error::{Error, Result};
use crate::learn::{predict_rows, FnnModel};
use crate::pipeline::features::FeatureMap;
use crate::qcore::{embed_pad, DensityMatrix, PureState};
use crate::states::{cluster4, dicke24, ghz, qutrit_family, w, NoiseConvention};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WernerFamily {
    Ghz3,
    W3,
    Ghz4,
    W4,
    Cl4,
    D24,
    Ghz5,
    Ghz43,
}

/// Cited noise thresholds; W₃ is exact, W₄ and D₂₄ are best-known GME bounds.
const W3_THRESHOLD: f64 = 0.521;
const CL4_THRESHOLD: f64 = 0.614;
const W4_KNOWN: f64 = 0.526;
const D24_KNOWN: f64 = 0.539;
/// GHZ₄₃ is GME for state weight above this value.
const GHZ43_KNOWN: f64 = 0.157;

/// Noise weight below which the GHZ-Werner state on `n` qubits is GME.
pub fn ghz_werner_threshold(n: usize) -> f64 {
    1.0 / (2.0 * (1.0 - 0.5f64.powi(n as i32)))
}

impl WernerFamily {
    pub const ALL: [WernerFamily; 8] = [
        WernerFamily::Ghz3,
        WernerFamily::W3,
        WernerFamily::Ghz4,
        WernerFamily::W4,
        WernerFamily::Cl4,
        WernerFamily::D24,
        WernerFamily::Ghz5,
        WernerFamily::Ghz43,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WernerFamily::Ghz3 => "ghz3",
            WernerFamily::W3 => "w3",
            WernerFamily::Ghz4 => "ghz4",
            WernerFamily::W4 => "w4",
            WernerFamily::Cl4 => "cl4",
            WernerFamily::D24 => "d24",
            WernerFamily::Ghz5 => "ghz5",
            WernerFamily::Ghz43 => "ghz43",
        }
    }

    pub fn base(self) -> Result<PureState<f64>> {
        match self {
            WernerFamily::Ghz3 => ghz(3, 2),
            WernerFamily::W3 => w(3),
            WernerFamily::Ghz4 => ghz(4, 2),
            WernerFamily::W4 => w(4),
            WernerFamily::Cl4 => Ok(cluster4()),
            WernerFamily::D24 => Ok(dicke24()),
            WernerFamily::Ghz5 => ghz(5, 2),
            WernerFamily::Ghz43 => ghz(3, 4),
        }
    }

    /// Convention the family is usually quoted in.
    pub fn default_convention(self) -> NoiseConvention {
        match self {
            WernerFamily::Ghz43 => NoiseConvention::StateWeight,
            _ => NoiseConvention::NoiseWeight,
        }
    }

    /// Known GME status at noise weight `q`, if any.
    pub fn ground_truth(self, q: f64) -> Option<bool> {
        match self {
            WernerFamily::Ghz3 => Some(q < ghz_werner_threshold(3)),
            WernerFamily::Ghz4 => Some(q < ghz_werner_threshold(4)),
            WernerFamily::Ghz5 => Some(q < ghz_werner_threshold(5)),
            WernerFamily::W3 => Some(q < W3_THRESHOLD),
            WernerFamily::Cl4 => Some(q < CL4_THRESHOLD),
            WernerFamily::W4 => (q < W4_KNOWN).then_some(true),
            WernerFamily::D24 => (q < D24_KNOWN).then_some(true),
            WernerFamily::Ghz43 => (1.0 - q > GHZ43_KNOWN).then_some(true),
        }
    }

    /// Exact or best-known threshold expressed in `convention`.
    pub fn reference_threshold(self, convention: NoiseConvention) -> f64 {
        let q = match self {
            WernerFamily::Ghz3 => ghz_werner_threshold(3),
            WernerFamily::Ghz4 => ghz_werner_threshold(4),
            WernerFamily::Ghz5 => ghz_werner_threshold(5),
            WernerFamily::W3 => W3_THRESHOLD,
            WernerFamily::Cl4 => CL4_THRESHOLD,
            WernerFamily::W4 => W4_KNOWN,
            WernerFamily::D24 => D24_KNOWN,
            WernerFamily::Ghz43 => 1.0 - GHZ43_KNOWN,
        };
        match convention {
            NoiseConvention::NoiseWeight => q,
            NoiseConvention::StateWeight => 1.0 - q,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::OutOfRange(format!("unknown family {name:?}")))
    }
}

/// `0, step, 2·step, …, 1`.
pub fn unit_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::OutOfRange(format!("grid step {step}")));
    }
    let n = (1.0 / step).round() as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub family: WernerFamily,
    pub convention: NoiseConvention,
    pub grid: Vec<f64>,
    pub outputs: Vec<f64>,
    pub predictions: Vec<bool>,
    pub ground_truth: Vec<Option<bool>>,
    /// Grid value at the GME edge of the best single-step fit.
    pub reported_threshold: f64,
    /// Span of known grid points predicted wrongly.
    pub wrong_interval: Option<(f64, f64)>,
    pub accuracy_on_known: f64,
    pub known_points: usize,
    pub reference_threshold: f64,
}

/// Best single-step fit of a prediction sequence. `gme_first` means the
/// expected pattern is true…true false…false. Returns the index of the
/// grid point on the GME side of the step, or `None` for an all-false fit.
pub fn step_fit(predictions: &[bool], gme_first: bool) -> Option<usize> {
    let n = predictions.len();
    let seq: Vec<bool> = if gme_first { predictions.to_vec() } else { predictions.iter().rev().copied().collect() };
    // mismatches of "true for i < s" for every split s
    let falses_before: Vec<usize> = std::iter::once(0)
        .chain(seq.iter().scan(0, |acc, &p| {
            *acc += !p as usize;
            Some(*acc)
        }))
        .collect();
    let trues_total = seq.iter().filter(|&&p| p).count();
    let mut best = (usize::MAX, 0);
    for s in 0..=n {
        let trues_before = s - falses_before[s];
        let miss = falses_before[s] + (trues_total - trues_before);
        // ties resolve to the widest GME side
        if miss <= best.0 {
            best = (miss, s);
        }
    }
    let s = best.1;
    if s == 0 {
        return None;
    }
    Some(if gme_first { s - 1 } else { n - s })
}

fn wrong_span(grid: &[f64], pred: &[bool], truth: &[Option<bool>]) -> Option<(f64, f64)> {
    let wrong: Vec<f64> = grid
        .iter()
        .zip(pred.iter().zip(truth))
        .filter(|(_, (p, t))| t.is_some_and(|t| t != **p))
        .map(|(g, _)| *g)
        .collect();
    Some((*wrong.first()?, *wrong.last()?))
}

fn mix_rows(parts: &[(f64, &[f64])], out: &mut Vec<f32>) {
    let len = parts[0].1.len();
    for i in 0..len {
        let v: f64 = parts.iter().map(|(w, c)| w * c[i]).sum();
        out.push(v.clamp(0.0, 1.0) as f32);
    }
}

/// Predictions for `family` mixed with white noise over the grid.
pub fn scan_werner(
    model: &FnnModel<f32>,
    fm: &FeatureMap,
    family: WernerFamily,
    convention: NoiseConvention,
    step: f64,
) -> Result<ScanReport> {
    fm.check_model(model)?;
    let grid = unit_grid(step)?;
    let psi = family.base()?;
    let state_part = fm.pure(&psi)?;
    let noise_part = fm.dense(&DensityMatrix::maximally_mixed(psi.dims().to_vec())?)?;
    let noise_weight = |p: f64| match convention {
        NoiseConvention::NoiseWeight => p,
        NoiseConvention::StateWeight => 1.0 - p,
    };
    let mut features = Vec::with_capacity(grid.len() * fm.len());
    for &p in &grid {
        let q = noise_weight(p);
        mix_rows(&[(1.0 - q, &state_part), (q, &noise_part)], &mut features);
    }
    let outputs: Vec<f64> = predict_rows(model, &features, fm.len())?.into_iter().map(f64::from).collect();
    let predictions: Vec<bool> = outputs.iter().map(|&o| o >= 0.5).collect();
    let ground_truth: Vec<Option<bool>> = grid.iter().map(|&p| family.ground_truth(noise_weight(p))).collect();
    let gme_first = convention == NoiseConvention::NoiseWeight;
    let reported_threshold =
        step_fit(&predictions, gme_first).map_or(if gme_first { grid[0] } else { 1.0 }, |i| grid[i]);
    let known: Vec<(bool, bool)> =
        predictions.iter().zip(&ground_truth).filter_map(|(&p, t)| t.map(|t| (p, t))).collect();
    let accuracy_on_known = if known.is_empty() {
        f64::NAN
    } else {
        known.iter().filter(|(p, t)| p == t).count() as f64 / known.len() as f64
    };
    Ok(ScanReport {
        family,
        convention,
        wrong_interval: wrong_span(&grid, &predictions, &ground_truth),
        grid,
        outputs,
        predictions,
        ground_truth,
        reported_threshold,
        accuracy_on_known,
        known_points: known.len(),
        reference_threshold: family.reference_threshold(convention),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaPoint {
    pub alpha: f64,
    pub beta: f64,
    pub output: f64,
    pub prediction: bool,
    /// Entropic criterion on the padded state.
    pub vrho_detected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaReport {
    pub step: f64,
    pub points: Vec<AlphaBetaPoint>,
    /// Per α: lowest β from which every larger β on the grid is predicted
    /// GME; `None` if the largest β is not.
    pub boundary: Vec<(f64, Option<f64>)>,
    /// Points detected by the entropic criterion but predicted biseparable.
    pub subset_violations: usize,
    pub vrho_points: usize,
}

impl AlphaBetaReport {
    pub fn boundary_at(&self, alpha: f64) -> Option<f64> {
        self.boundary.iter().find(|(a, _)| (a - alpha).abs() < self.step / 2.0).and_then(|b| b.1)
    }
}

/// Prediction map of the qutrit family over `α, β ≥ 0, α + β ≤ 1`, with
/// each qutrit padded to the devices' local dimension.
pub fn scan_alpha_beta(model: &FnnModel<f32>, fm: &FeatureMap, step: f64) -> Result<AlphaBetaReport> {
    fm.check_model(model)?;
    let axis = unit_grid(step)?;
    let n = axis.len() - 1;
    let corners = [qutrit_family::<f64>(0.0, 0.0)?, qutrit_family(1.0, 0.0)?, qutrit_family(0.0, 1.0)?];
    let parts = corners.iter().map(|c| fm.dense(c)).collect::<Result<Vec<_>>>()?;
    let mut coords = Vec::new();
    for i in 0..=n {
        for j in 0..=(n - i) {
            coords.push((axis[i], axis[j]));
        }
    }
    let mut features = Vec::with_capacity(coords.len() * fm.len());
    for &(a, b) in &coords {
        let g = (1.0 - a - b).max(0.0);
        mix_rows(&[(g, &parts[0]), (a, &parts[1]), (b, &parts[2])], &mut features);
    }
    let outputs = predict_rows(model, &features, fm.len())?;
    let target = fm.devices.dims().to_vec();
    let vrho_hits = coords
        .par_iter()
        .map(|&(a, b)| {
            let rho = embed_pad(&qutrit_family(a, b)?, &target)?;
            Ok(vrho(&rho)?.detected)
        })
        .collect::<Result<Vec<bool>>>()?;
    let points: Vec<AlphaBetaPoint> = coords
        .iter()
        .zip(outputs)
        .zip(vrho_hits)
        .map(|((&(alpha, beta), o), v)| AlphaBetaPoint {
            alpha,
            beta,
            output: o as f64,
            prediction: o >= 0.5,
            vrho_detected: v,
        })
        .collect();
    let mut boundary = Vec::new();
    let mut start = 0;
    for i in 0..=n {
        let column = &points[start..start + (n - i + 1)];
        start += n - i + 1;
        // column is ordered by increasing β
        let suffix = column.iter().rev().take_while(|p| p.prediction).count();
        let edge = (suffix > 0).then(|| column[column.len() - suffix].beta);
        boundary.push((axis[i], edge));
    }
    let subset_violations = points.iter().filter(|p| p.vrho_detected && !p.prediction).count();
    let vrho_points = points.iter().filter(|p| p.vrho_detected).count();
    Ok(AlphaBetaReport { step, points, boundary, subset_violations, vrho_points })
}
