use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::dataset::LabeledDataset;
use crate::learn::network::{FnnConfig, FnnModel, Gradients, Layer};
use crate::rng::substream;
use crate::scalar::Real;

/// Rows evaluated per inference pass.
const EVAL_CHUNK: usize = 4096;

pub const MODEL_VERSION: u32 = 1;

/// Adam moments, bias-corrected at each step.
struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: i32,
    m: Vec<Layer<T>>,
    v: Vec<Layer<T>>,
}

impl<T: Real> Adam<T> {
    fn new(model: &FnnModel<T>, lr: f64) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| Layer { w: Array2::zeros(l.w.raw_dim()), b: Array1::zeros(l.b.raw_dim()) })
                .collect::<Vec<_>>()
        };
        Self { lr: T::of(lr), beta1: T::of(0.9), beta2: T::of(0.999), eps: T::of(1e-8), t: 0, m: zeros(), v: zeros() }
    }

    fn step(&mut self, model: &mut FnnModel<T>, g: &Gradients<T>) {
        self.t += 1;
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let upd = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (l, layer) in model.layers.iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.w)
                .and(&g.layers[l].w)
                .and(&mut self.m[l].w)
                .and(&mut self.v[l].w)
                .for_each(|p, &g, m, v| upd(p, g, m, v));
            ndarray::Zip::from(&mut layer.b)
                .and(&g.layers[l].b)
                .and(&mut self.m[l].b)
                .and(&mut self.v[l].b)
                .for_each(|p, &g, m, v| upd(p, g, m, v));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept (1-based; the last epoch without a
    /// validation split).
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub train_rows: usize,
    pub val_rows: usize,
}

/// Training options beyond the architecture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    /// Fraction held out for early stopping; 0 disables the split.
    pub validation_fraction: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { validation_fraction: 0.1 }
    }
}

fn check_data<T: Real>(model: &FnnModel<T>, data: &LabeledDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "dataset has {} features, network expects {}",
            data.dim(),
            model.input_dim()
        )));
    }
    Ok(())
}

/// Mini-batch Adam on the mean cross-entropy. The held-out split and the
/// batch order depend only on `model.config.seed`; the weights with the
/// lowest validation loss are restored at the end.
pub fn train<T: Real>(
    mut model: FnnModel<T>,
    data: &LabeledDataset,
    opts: TrainOptions,
) -> Result<(FnnModel<T>, TrainingReport)> {
    check_data(&model, data)?;
    let cfg = model.config.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut substream(cfg.seed, 1));
    let n_val = ((data.len() as f64) * opts.validation_fraction).round() as usize;
    let n_val = n_val.min(data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_x: Array2<T> = FnnModel::batch_from_rows(data.features(), data.dim(), val_idx);
    let val_y: Vec<bool> = val_idx.iter().map(|&i| data.labels()[i]).collect();

    let mut shuffle_rng = substream(cfg.seed, 2);
    let mut dropout_rng = substream(cfg.seed, 3);
    let mut adam = Adam::new(&model, cfg.learning_rate);
    let mut best: Option<(f64, usize, Vec<Layer<T>>)> = None;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        train_idx.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let x: Array2<T> = FnnModel::batch_from_rows(data.features(), data.dim(), batch);
            let y: Vec<bool> = batch.iter().map(|&i| data.labels()[i]).collect();
            let (loss, g) = model.loss_and_gradients(x.view(), &y, Some(&mut dropout_rng))?;
            loss_sum += loss.as_f64() * batch.len() as f64;
            adam.step(&mut model, &g);
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let mut stats = EpochStats { epoch, train_loss, val_loss: None, val_accuracy: None };
        if n_val > 0 {
            let out = outputs(&model, val_x.view());
            let vl = crate::learn::network::bce_loss(&out, &val_y)?.as_f64();
            stats.val_loss = Some(vl);
            stats.val_accuracy = Some(accuracy(&out, &val_y));
            let improved = best.as_ref().is_none_or(|(b, _, _)| vl < *b);
            if improved {
                best = Some((vl, epoch, model.layers.clone()));
            }
            epochs.push(stats);
            let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
            if epoch - best_epoch >= cfg.patience {
                stopped_early = true;
                break;
            }
        } else {
            epochs.push(stats);
        }
    }
    let ran = epochs.len();
    let best_epoch = match best {
        Some((_, e, layers)) => {
            model.layers = layers;
            e
        }
        None => ran,
    };
    model.trained_epochs += ran;
    if !data.meta.device_fingerprint.is_empty() {
        model.device_fingerprint = Some(data.meta.device_fingerprint.clone());
    }
    let report = TrainingReport { epochs, best_epoch, stopped_early, train_rows: train_idx.len(), val_rows: n_val };
    Ok((model, report))
}

fn outputs<T: Real>(model: &FnnModel<T>, x: ArrayView2<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(x.nrows());
    for start in (0..x.nrows()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(x.nrows());
        let chunk = x.slice(ndarray::s![start..end, ..]);
        out.extend(model.forward_batch(chunk).expect("checked width").iter().copied());
    }
    out
}

fn accuracy<T: Real>(out: &[T], labels: &[bool]) -> f64 {
    let half = T::of(0.5);
    let hits = out.iter().zip(labels).filter(|(&p, &y)| (p >= half) == y).count();
    hits as f64 / labels.len() as f64
}

/// Inference-mode outputs for every row.
pub fn predict_proba<T: Real>(model: &FnnModel<T>, data: &LabeledDataset) -> Result<Vec<T>> {
    predict_rows(model, data.features(), data.dim())
}

/// Inference-mode outputs for a row-major feature buffer of width `dim`.
pub fn predict_rows<T: Real>(model: &FnnModel<T>, features: &[f32], dim: usize) -> Result<Vec<T>> {
    if dim != model.input_dim() || !features.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch(format!(
            "{} values of width {dim}, network expects {}",
            features.len(),
            model.input_dim()
        )));
    }
    let rows = features.len() / dim;
    let mut out = Vec::with_capacity(rows);
    let idx: Vec<usize> = (0..rows).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let x: Array2<T> = FnnModel::batch_from_rows(features, dim, chunk);
        out.extend(model.forward_batch(x.view())?.iter().copied());
    }
    Ok(out)
}

/// `forward ≥ 0.5` for every row.
pub fn predict_all<T: Real>(model: &FnnModel<T>, data: &LabeledDataset) -> Result<Vec<bool>> {
    let half = T::of(0.5);
    Ok(predict_proba(model, data)?.into_iter().map(|p| p >= half).collect())
}

/// Fraction of rows whose prediction matches the label.
pub fn evaluate<T: Real>(model: &FnnModel<T>, data: &LabeledDataset) -> Result<f64> {
    check_data(model, data)?;
    Ok(accuracy(&predict_proba(model, data)?, data.labels()))
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    config: FnnConfig,
    layers: Vec<LayerFile>,
    version: u32,
    #[serde(default)]
    trained_epochs: usize,
    #[serde(default)]
    device_fingerprint: Option<String>,
}

impl<T: Real> FnnModel<T> {
    pub fn to_json(&self) -> Vec<u8> {
        let f = ModelFile {
            config: self.config.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    w: l.w.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect(),
                    b: l.b.iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
            version: MODEL_VERSION,
            trained_epochs: self.trained_epochs,
            device_fingerprint: self.device_fingerprint.clone(),
        };
        serde_json::to_vec(&f).expect("models serialize")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        // the version is checked before the rest of the schema
        let probe: serde_json::Value = serde_json::from_slice(bytes)?;
        let version = probe.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_VERSION {
            return Err(Error::Version(version));
        }
        let f: ModelFile = serde_json::from_value(probe)?;
        f.config.validate()?;
        let widths: Vec<usize> = std::iter::once(f.config.input_dim)
            .chain(f.config.hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        if f.layers.len() != widths.len() - 1 {
            return Err(Error::Malformed(format!(
                "{} layers for {} hidden widths",
                f.layers.len(),
                f.config.hidden.len()
            )));
        }
        let layers = f
            .layers
            .iter()
            .zip(widths.windows(2))
            .map(|(l, w)| {
                if l.w.len() != w[0] || l.w.iter().any(|r| r.len() != w[1]) || l.b.len() != w[1] {
                    return Err(Error::Malformed(format!("layer shape does not match {} -> {}", w[0], w[1])));
                }
                let flat: Vec<T> = l.w.iter().flatten().map(|&v| T::of(v)).collect();
                Ok(Layer {
                    w: Array2::from_shape_vec((w[0], w[1]), flat).expect("checked shape"),
                    b: l.b.iter().map(|&v| T::of(v)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: f.config,
            layers,
            trained_epochs: f.trained_epochs,
            device_fingerprint: f.device_fingerprint,
        })
    }
}

pub fn save_model<T: Real>(model: &FnnModel<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model.to_json())?;
    Ok(())
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<FnnModel<T>> {
    FnnModel::from_json(&std::fs::read(path)?)
}

/// Initializes from `cfg` and trains with default options.
pub fn fit<T: Real>(cfg: &FnnConfig, data: &LabeledDataset) -> Result<(FnnModel<T>, TrainingReport)> {
    let model = crate::learn::network::init_model(cfg)?;
    train(model, data, TrainOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::dataset::DatasetMeta;
    use crate::learn::network::init_model;
    use rand::Rng;

    fn random_set(rows: usize, dim: usize, seed: u64, label: impl FnMut(&[f32]) -> bool) -> LabeledDataset {
        let mut rng = substream(seed, 0);
        let features: Vec<f32> = (0..rows * dim).map(|_| rng.gen::<f32>()).collect();
        let labels = features.chunks(dim).map(label).collect();
        LabeledDataset::new(dim, features, labels, DatasetMeta::default()).unwrap()
    }

    #[test]
    fn overfits_random_labels() {
        let mut flip = substream(40, 1);
        let labels: Vec<bool> = (0..100).map(|_| flip.gen()).collect();
        let mut i = 0;
        let data = random_set(100, 16, 40, |_| {
            i += 1;
            labels[i - 1]
        });
        let mut cfg = FnnConfig::new(16, vec![64, 64], 0.0, 2);
        cfg.learning_rate = 1e-2;
        cfg.batch_size = 32;
        cfg.max_epochs = 400;
        let model = init_model::<f32>(&cfg).unwrap();
        let (model, report) = train(model, &data, TrainOptions { validation_fraction: 0.0 }).unwrap();
        let acc = evaluate(&model, &data).unwrap();
        assert!(acc >= 0.99, "training accuracy {acc}");
        assert_eq!(report.epochs.len(), 400);
        assert_eq!(model.trained_epochs, 400);
    }

    #[test]
    fn full_batch_loss_decreases_on_separable_data() {
        let data = random_set(200, 4, 41, |r| r[0] + r[1] > r[2] + r[3]);
        let mut cfg = FnnConfig::new(4, vec![8], 0.0, 3);
        cfg.batch_size = 200;
        cfg.max_epochs = 150;
        let model = init_model::<f64>(&cfg).unwrap();
        let (_, report) = train(model, &data, TrainOptions { validation_fraction: 0.0 }).unwrap();
        for w in report.epochs.windows(2) {
            assert!(
                w[1].train_loss <= w[0].train_loss,
                "epoch {}: {} > {}",
                w[1].epoch,
                w[1].train_loss,
                w[0].train_loss
            );
        }
    }

    #[test]
    fn training_is_deterministic_and_stops_early() {
        let data = random_set(600, 6, 42, |r| r[0] > 0.5);
        let mut cfg = FnnConfig::new(6, vec![12, 6], 0.2, 4);
        cfg.batch_size = 64;
        cfg.patience = 3;
        let run = || train(init_model::<f32>(&cfg).unwrap(), &data, TrainOptions::default()).unwrap();
        let (a, ra) = run();
        let (b, rb) = run();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.val_rows, 60);
        assert!(ra.stopped_early, "ran {} epochs", ra.epochs.len());
        let best = ra.epochs[ra.best_epoch - 1].val_loss.unwrap();
        assert!(ra.epochs.iter().all(|e| e.val_loss.unwrap() >= best));
        assert!(evaluate(&a, &data).unwrap() > 0.9);
    }

    #[test]
    fn evaluation_errors_and_threshold() {
        let cfg = FnnConfig::new(3, vec![2], 0.0, 0);
        let mut m = init_model::<f32>(&cfg).unwrap();
        let empty = LabeledDataset::new(3, vec![], vec![], DatasetMeta::default()).unwrap();
        assert!(matches!(evaluate(&m, &empty), Err(Error::EmptyDataset)));
        let wrong = random_set(5, 4, 1, |_| true);
        assert!(evaluate(&m, &wrong).is_err());
        for l in &mut m.layers {
            l.w.fill(0.0);
        }
        let d = random_set(5, 3, 1, |_| true);
        assert_eq!(predict_all(&m, &d).unwrap(), vec![true; 5]);
        assert_eq!(evaluate(&m, &d).unwrap(), 1.0);
    }

    #[test]
    fn evaluation_is_permutation_invariant() {
        let d = random_set(50, 5, 7, |r| r[1] > 0.3);
        let m = init_model::<f32>(&FnnConfig::new(5, vec![7], 0.2, 9)).unwrap();
        let rev: Vec<usize> = (0..50).rev().collect();
        assert_eq!(evaluate(&m, &d).unwrap(), evaluate(&m, &d.subset(&rev)).unwrap());
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let m = init_model::<f32>(&FnnConfig::preset(3, 2, 64, 8).unwrap()).unwrap();
        save_model(&m, &p).unwrap();
        let back: FnnModel<f32> = load_model(&p).unwrap();
        assert_eq!(back.config, m.config);
        let d = random_set(100, 64, 3, |_| false);
        assert_eq!(predict_proba(&m, &d).unwrap(), predict_proba(&back, &d).unwrap());

        let mut v: serde_json::Value = serde_json::from_slice(&m.to_json()).unwrap();
        v["version"] = 2.into();
        std::fs::write(&p, serde_json::to_vec(&v).unwrap()).unwrap();
        assert!(matches!(load_model::<f32>(&p), Err(Error::Version(2))));
        std::fs::write(&p, b"{\"version\":1}").unwrap();
        assert!(load_model::<f32>(&p).is_err());
    }
}
