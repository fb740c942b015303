//! Independent oracles shared by the integration tests and the acceptance
//! suite.
#![allow(dead_code, clippy::needless_range_loop)]

use gme_core::criteria::ProductProbe;
use gme_core::learn::{bce_loss, init_model, FnnConfig, FnnModel};
use gme_core::measure::DeviceSet;
use gme_core::qcore::{digits, kron, ComplexMatrix, DensityMatrix};
use gme_core::rng::{substream, StreamRng};
use gme_core::scalar::C;
use ndarray::{Array2, Axis};
use rand::Rng;

type C64 = C<f64>;

/// Swap of the two copies of party `i` inside `H^{⊗2}` (parties ordered
/// copy 1 then copy 2).
fn swap_party(dims: &[usize], i: usize) -> ComplexMatrix<f64> {
    let n = dims.len();
    let doubled: Vec<usize> = dims.iter().chain(dims).copied().collect();
    let total: usize = doubled.iter().product();
    let mut p = ComplexMatrix::zeros(total, total);
    for idx in 0..total {
        let mut d = digits(idx, &doubled);
        d.swap(i, n + i);
        let target = d.iter().zip(&doubled).fold(0, |acc, (&x, &dim)| acc * dim + x);
        p[(target, idx)] = C64::new(1.0, 0.0);
    }
    p
}

/// Bound `F` evaluated with explicit `ρ⊗ρ`, the full swap `Π` and the
/// party swaps `Pᵢ`, over ordered pairs `i ≠ j`.
pub fn concurrence_bound_doubled(rho: &DensityMatrix<f64>, probe: &ProductProbe<f64>) -> f64 {
    let dims = rho.dims().to_vec();
    let n = dims.len();
    let rr = kron(rho.matrix(), rho.matrix());
    let swaps: Vec<ComplexMatrix<f64>> = (0..n).map(|i| swap_party(&dims, i)).collect();
    let mut pi = ComplexMatrix::identity(rr.rows());
    for s in &swaps {
        pi = pi.matmul(s).unwrap();
    }
    let rr_pi = rr.matmul(&pi).unwrap();
    let single: Vec<Vec<C64>> = (0..n).map(|i| probe.vector(&[i])).collect();
    let pair = |i: usize, j: usize| -> Vec<C64> {
        // |Ψᵢⱼ⟩ = |ψᵢ⟩ ⊗ |ψⱼ⟩ in the doubled space
        single[i].iter().flat_map(|a| single[j].iter().map(move |b| a * b)).collect()
    };
    let mut coherence = 0.0;
    let mut product = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = pair(i, j);
            coherence += rr_pi.sandwich(&v, &v).re.abs().sqrt();
            let pv = swaps[i].matvec(&v).unwrap();
            product += rr.sandwich(&pv, &pv).re.max(0.0).sqrt();
        }
    }
    let mut diagonal = 0.0;
    for i in 0..n {
        let v = pair(i, i);
        let pv = swaps[i].matvec(&v).unwrap();
        diagonal += rr.sandwich(&pv, &pv).re.max(0.0).sqrt();
    }
    coherence - product - (n as f64 - 2.0) * diagonal
}

/// `p(a|x) = tr(ρ ⊗ᵢ Π_{aᵢ|xᵢ})` built from explicit projector products.
pub fn born_table(rho: &DensityMatrix<f64>, ds: &DeviceSet<f64>) -> Vec<f64> {
    let dims = ds.dims();
    let n = dims.len();
    let settings = vec![ds.m(); n];
    let n_settings: usize = settings.iter().product();
    let n_outcomes: usize = dims.iter().product();
    let mut out = Vec::with_capacity(n_settings * n_outcomes);
    for s in 0..n_settings {
        let xs = digits(s, &settings);
        for o in 0..n_outcomes {
            let a = digits(o, dims);
            let mut e = ComplexMatrix::identity(1);
            for i in 0..n {
                e = kron(&e, &ds.device(i, xs[i]).projectors()[a[i]]);
            }
            out.push(e.trace_product_re(rho.matrix()));
        }
    }
    out
}

pub fn inputs(rows: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = substream(seed, 0);
    Array2::from_shape_fn((rows, dim), |_| rng.gen_range(0.0..1.0))
}

/// Smallest |pre-activation| over the hidden layers, computed independently
/// of the library's forward pass.
fn closest_to_kink(m: &FnnModel<f64>, x: &Array2<f64>) -> f64 {
    let mut a = x.clone();
    let mut closest = f64::INFINITY;
    for layer in &m.layers[..m.layers.len() - 1] {
        let z = a.dot(&layer.w) + layer.b.view().insert_axis(Axis(0));
        closest = z.iter().fold(closest, |c, v| c.min(v.abs()));
        a = z.mapv(|v| v.max(0.0));
    }
    closest
}

/// Largest per-layer relative error `‖g − ĝ‖ / (‖g‖ + ‖ĝ‖)` between analytic
/// and central-difference gradients on a 10-row batch.
pub fn gradient_error(cfg: FnnConfig) -> f64 {
    let h = 1e-4;
    let x = inputs(10, cfg.input_dim, cfg.seed);
    let y: Vec<bool> = (0..10).map(|i| i % 3 != 1).collect();
    let mut m = init_model::<f64>(&cfg).unwrap();
    // biases redrawn until no unit sits within 10h of the ReLU kink
    let mut rng = substream(cfg.seed, 1);
    loop {
        for l in &mut m.layers {
            l.b.mapv_inplace(|_| rng.gen_range(-0.1..0.1));
        }
        if closest_to_kink(&m, &x) > 10.0 * h {
            break;
        }
    }
    let loss = |m: &FnnModel<f64>| m.loss_and_gradients::<StreamRng>(x.view(), &y, None).unwrap().0;
    let (l0, g) = m.loss_and_gradients::<StreamRng>(x.view(), &y, None).unwrap();
    let forward = m.forward_batch(x.view()).unwrap();
    assert!((l0 - bce_loss(forward.as_slice().unwrap(), &y).unwrap()).abs() < 1e-12);
    let mut worst: f64 = 0.0;
    for (l, layer) in m.layers.iter().enumerate() {
        // logical row-major order; the gradient need not be contiguous
        let mut analytic: Vec<f64> = g.layers[l].w.iter().copied().collect();
        let mut numeric = Vec::new();
        for idx in 0..layer.w.len() {
            let mut p = m.clone();
            p.layers[l].w.as_slice_mut().unwrap()[idx] += h;
            let mut q = m.clone();
            q.layers[l].w.as_slice_mut().unwrap()[idx] -= h;
            numeric.push((loss(&p) - loss(&q)) / (2.0 * h));
        }
        for idx in 0..layer.b.len() {
            let mut p = m.clone();
            p.layers[l].b[idx] += h;
            let mut q = m.clone();
            q.layers[l].b[idx] -= h;
            numeric.push((loss(&p) - loss(&q)) / (2.0 * h));
            analytic.push(g.layers[l].b[idx]);
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 =
            analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / scale);
    }
    worst
}
