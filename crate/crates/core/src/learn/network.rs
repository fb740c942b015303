use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::scalar::Real;

/// Lower clamp applied to predictions inside the loss; the upper clamp is
/// `1 − PRED_CLAMP`.
pub const PRED_CLAMP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnnConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    /// Dropout rate applied after the first hidden layer.
    pub dropout_after_first: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl FnnConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, dropout_after_first: f64, seed: u64) -> Self {
        Self {
            input_dim,
            hidden,
            dropout_after_first,
            seed,
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 15,
        }
    }

    /// Hidden widths for `n` parties of local dimension `d`; the 5-partite
    /// network reuses the `n = 5, d = 2` row for `d = 4` inputs.
    pub fn preset(n: usize, d: usize, input_dim: usize, seed: u64) -> Result<Self> {
        let hidden = match (n, d) {
            (3, 2) => vec![90, 60, 60, 60],
            (3, 4) => vec![20, 12, 12, 12],
            (4, 2) => vec![70, 46, 46, 46],
            (5, 2) | (5, 4) => vec![65, 42, 42, 42],
            _ => return Err(Error::OutOfRange(format!("no network preset for n = {n}, d = {d}"))),
        };
        Ok(Self::new(input_dim, hidden, 0.2, seed))
    }

    /// Graph-state network: three hidden layers, no dropout.
    pub fn graph(input_dim: usize, seed: u64) -> Self {
        Self::new(input_dim, vec![50, 25, 10], 0.0, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidDimension(format!("network {} -> {:?} -> 1", self.input_dim, self.hidden)));
        }
        if !(0.0..1.0).contains(&self.dropout_after_first) {
            return Err(Error::OutOfRange(format!("dropout rate {}", self.dropout_after_first)));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::OutOfRange("batch size and learning rate must be positive".into()));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(1);
        w
    }
}

/// Affine layer `x ↦ x·W + b` with `W` of shape `fan_in × fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FnnModel<T> {
    pub config: FnnConfig,
    pub layers: Vec<Layer<T>>,
    pub trained_epochs: usize,
    /// Device fingerprint of the training features, when known.
    pub device_fingerprint: Option<String>,
}

/// Uniform init in `±√(6/(fan_in + fan_out))`, zero biases.
pub fn init_model<T: Real>(cfg: &FnnConfig) -> Result<FnnModel<T>> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, 0);
    let layers = cfg
        .widths()
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Layer {
                w: Array2::from_shape_simple_fn((fan_in, fan_out), || T::of(rng.gen_range(-limit..limit))),
                b: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(FnnModel { config: cfg.clone(), layers, trained_epochs: 0, device_fingerprint: None })
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Per-layer activations of one batch pass, kept for backpropagation.
pub(crate) struct Trace<T> {
    /// Inputs to each layer (post activation and dropout).
    inputs: Vec<Array2<T>>,
    /// Scaled dropout mask applied after the first hidden layer.
    mask: Option<Array2<T>>,
    pub(crate) output: Array1<T>,
}

/// Per-layer gradients, same shapes as the model.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Real> FnnModel<T> {
    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.config.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "{cols} features for a network with input dimension {}",
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Batch pass; with `dropout` set, hidden layer 1 is masked with inverted
    /// scaling `1/(1−rate)`.
    pub(crate) fn run<R: Rng + ?Sized>(&self, x: ArrayView2<T>, mut dropout: Option<&mut R>) -> Trace<T> {
        let last = self.layers.len() - 1;
        let rate = self.config.dropout_after_first;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut mask = None;
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w);
            z += &layer.b;
            inputs.push(a);
            if l == last {
                let out = z.column(0).mapv(sigmoid);
                return Trace { inputs, mask, output: out };
            }
            z.mapv_inplace(|v| v.max(T::zero()));
            if l == 0 && rate > 0.0 {
                if let Some(rng) = dropout.as_deref_mut() {
                    let keep = T::one() / T::of(1.0 - rate);
                    let m = Array2::from_shape_simple_fn(z.raw_dim(), || {
                        if rng.gen::<f64>() < rate {
                            T::zero()
                        } else {
                            keep
                        }
                    });
                    z *= &m;
                    mask = Some(m);
                }
            }
            a = z;
        }
        unreachable!("network has an output layer")
    }

    /// Inference-mode outputs for a batch of rows.
    pub fn forward_batch(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        self.check_input(x.ncols())?;
        Ok(self.run::<rand_chacha::ChaCha8Rng>(x, None).output)
    }

    /// Single-sample output in `(0, 1)`; dropout is active only when `train`
    /// is given a generator.
    pub fn forward<R: Rng + ?Sized>(&self, x: &[T], train: Option<&mut R>) -> Result<T> {
        self.check_input(x.len())?;
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row shape");
        Ok(self.run(view, train).output[0])
    }

    /// `forward ≥ 0.5`.
    pub fn predict(&self, x: &[T]) -> Result<bool> {
        Ok(self.forward::<rand_chacha::ChaCha8Rng>(x, None)? >= T::of(0.5))
    }

    /// Mean loss and its gradient on one batch.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<T>,
        y: &[bool],
        dropout: Option<&mut R>,
    ) -> Result<(T, Gradients<T>)> {
        self.check_input(x.ncols())?;
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!("{} rows, {} labels", x.nrows(), y.len())));
        }
        let trace = self.run(x, dropout);
        Ok(self.backward(trace, y))
    }

    pub(crate) fn backward(&self, trace: Trace<T>, y: &[bool]) -> (T, Gradients<T>) {
        let n = T::of(y.len() as f64);
        let (lo, hi) = (T::of(PRED_CLAMP), T::of(1.0 - PRED_CLAMP));
        let loss = bce_loss_unchecked(trace.output.as_slice().expect("contiguous"), y);
        // dL/dz at the output; zero where the clamp is active
        let mut delta = Array2::zeros((y.len(), 1));
        for (i, (&p, &t)) in trace.output.iter().zip(y).enumerate() {
            if p >= lo && p <= hi {
                let t = if t { T::one() } else { T::zero() };
                delta[(i, 0)] = (p - t) / n;
            }
        }
        let mut grads: Vec<Layer<T>> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let a = &trace.inputs[l];
            grads.push(Layer { w: a.t().dot(&delta), b: delta.sum_axis(Axis(0)) });
            if l == 0 {
                break;
            }
            let mut prev = delta.dot(&self.layers[l].w.t());
            // input of layer l is relu(z) (times mask for l == 1); relu' = 1[a > 0]
            Zip::from(&mut prev).and(a).for_each(|d, &act| {
                if act <= T::zero() {
                    *d = T::zero();
                }
            });
            if l == 1 {
                // a = relu(z)·m, so dz = da·m·1[a > 0]
                if let Some(m) = &trace.mask {
                    prev *= m;
                }
            }
            delta = prev;
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Rows `range` of a row-major feature buffer as a batch.
    pub(crate) fn batch_from_rows(features: &[f32], dim: usize, rows: &[usize]) -> Array2<T> {
        let mut out = Array2::zeros((rows.len(), dim));
        for (i, &r) in rows.iter().enumerate() {
            let src = &features[r * dim..(r + 1) * dim];
            for (o, &v) in out.slice_mut(s![i, ..]).iter_mut().zip(src) {
                *o = T::of(v as f64);
            }
        }
        out
    }
}

fn bce_loss_unchecked<T: Real>(pred: &[T], labels: &[bool]) -> T {
    let (lo, hi) = (T::of(PRED_CLAMP), T::of(1.0 - PRED_CLAMP));
    let sum: T = pred
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.max(lo).min(hi);
            if y {
                -p.ln()
            } else {
                -(T::one() - p).ln()
            }
        })
        .sum();
    sum / T::of(pred.len() as f64)
}

/// Mean binary cross-entropy (natural log) with predictions clamped to
/// `[1e-7, 1 − 1e-7]`.
pub fn bce_loss<T: Real>(pred: &[T], labels: &[bool]) -> Result<T> {
    if pred.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions, {} labels", pred.len(), labels.len())));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(bce_loss_unchecked(pred, labels))
}
