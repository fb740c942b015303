//! Library routines checked against independent implementations: nalgebra
//! for the spectral code, explicit doubled-space operators for the
//! concurrence bound, and direct Born sums for the correlation features.

mod common;

use common::{born_table, concurrence_bound_doubled};
use gme_core::criteria::{concurrence_fast_terms, concurrence_lower_bound, ProductProbe};
use gme_core::measure::{correlation, correlation_pure, k_correlation, sample_device_set, DeviceSet};
use gme_core::qcore::{
    digits, hermitian_eigen, hermitian_eigenvalues, kyfan_norm, partial_trace, random_density_with_dims,
    sample_haar_unitary, singular_values, ComplexMatrix, DensityMatrix, PureState,
};
use gme_core::rng::substream;
use gme_core::scalar::C;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

type C64 = C<f64>;

fn to_na(m: &ComplexMatrix<f64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix<f64> {
    let a = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let mut h = a.clone();
    h.add_scaled(&a.adjoint(), 1.0);
    h
}

#[test]
fn hermitian_spectrum_matches_nalgebra() {
    let mut rng = substream(101, 0);
    for n in [1, 2, 3, 5, 8, 16, 27, 64] {
        let h = random_hermitian(n, &mut rng);
        let ours = hermitian_eigenvalues(&h).unwrap();
        let mut theirs: Vec<f64> = to_na(&h).symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "n = {n}: {a} vs {b}");
        }
        // eigenvectors reconstruct H
        let e = hermitian_eigen(&h).unwrap();
        let d = ComplexMatrix::from_real_diag(&e.values);
        let back = e.vectors.matmul(&d).unwrap().matmul(&e.vectors.adjoint()).unwrap();
        assert!(back.max_abs_diff(&h) < 1e-9 * (1.0 + h.frobenius_norm()), "n = {n}");
    }
}

#[test]
fn singular_values_and_kyfan_match_nalgebra() {
    let mut rng = substream(102, 0);
    for (r, c) in [(1, 1), (2, 3), (3, 2), (4, 4), (9, 9), (4, 16), (16, 4)] {
        let m = ComplexMatrix::from_fn(r, c, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let ours = singular_values(&m);
        let mut theirs: Vec<f64> = to_na(&m).singular_values().iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(ours.len(), theirs.len());
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-9, "{r}x{c}: {a} vs {b}");
        }
        for k in 1..=r.min(c) {
            let expect: f64 = theirs[..k].iter().sum();
            assert!((kyfan_norm(&m, k).unwrap() - expect).abs() < 1e-9);
        }
        // nuclear norm = tr √(M†M), through an independent eigen solve on the
        // smaller Gram matrix (the larger one adds √ε noise from its zeros)
        let a = to_na(&m);
        let mtm = if r < c { &a * a.adjoint() } else { a.adjoint() * &a };
        let nuclear: f64 = mtm.symmetric_eigenvalues().iter().map(|v| v.max(0.0).sqrt()).sum();
        assert!((kyfan_norm(&m, r.min(c)).unwrap() - nuclear).abs() < 1e-8);
    }
}

#[test]
fn partial_trace_inverts_tensor_product() {
    let mut rng = substream(103, 0);
    for _ in 0..100 {
        let a: DensityMatrix<f64> = random_density_with_dims(&[2], rng.gen_range(1..=2), &mut rng).unwrap();
        let b: DensityMatrix<f64> = random_density_with_dims(&[3, 2], rng.gen_range(1..=6), &mut rng).unwrap();
        let ab = a.tensor(&b);
        assert!(partial_trace(&ab, &[0]).unwrap().matrix().max_abs_diff(a.matrix()) < 1e-12);
        assert!(partial_trace(&ab, &[1, 2]).unwrap().matrix().max_abs_diff(b.matrix()) < 1e-12);
    }
}

#[test]
fn concurrence_fast_path_matches_doubled_space() {
    let mut rng = substream(104, 0);
    for case in 0..20 {
        let rank = rng.gen_range(1..=8);
        let rho: DensityMatrix<f64> = random_density_with_dims(&[2, 2, 2], rank, &mut rng).unwrap();
        let probe = ProductProbe::random(&[2, 2, 2], case, &mut rng).unwrap();
        let fast = concurrence_lower_bound(&rho, &probe).unwrap().margin;
        let slow = concurrence_bound_doubled(&rho, &probe);
        assert!(
            (fast - slow).abs() < 1e-9,
            "case {case}: fast {fast}, doubled {slow}, terms {:?}",
            concurrence_fast_terms(&rho, &probe).unwrap()
        );
    }
}

#[test]
fn correlation_matches_born_rule_normalizes_and_is_no_signaling() {
    let mut rng = substream(105, 0);
    let shapes: [(&[usize], usize); 4] = [(&[2, 2, 2], 2), (&[2, 2, 2, 2], 2), (&[2, 3], 3), (&[3, 3, 3], 2)];
    let mut checked = 0;
    for (shape, m) in shapes {
        let ds = sample_device_set::<f64>(shape, m, rng.gen()).unwrap();
        let n_outcomes: usize = shape.iter().product();
        for _ in 0..25 {
            let rank = rng.gen_range(1..=n_outcomes);
            let rho: DensityMatrix<f64> = random_density_with_dims(shape, rank, &mut rng).unwrap();
            let c = correlation(&rho, &ds).unwrap().values;
            let born = born_table(&rho, &ds);
            for (x, y) in c.iter().zip(&born) {
                assert!((x - y).abs() < 1e-12);
            }
            // normalization per setting tuple
            for block in c.chunks(n_outcomes) {
                assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            // no-signaling: party-0 marginal does not depend on the others' settings
            let n = shape.len();
            let settings = vec![m; n];
            let mut marginals: Vec<Vec<Vec<f64>>> = vec![Vec::new(); m];
            for (s, block) in c.chunks(n_outcomes).enumerate() {
                let x0 = digits(s, &settings)[0];
                let mut marg = vec![0.0; shape[0]];
                for (o, p) in block.iter().enumerate() {
                    marg[digits(o, shape)[0]] += p;
                }
                marginals[x0].push(marg);
            }
            for group in &marginals {
                for other in &group[1..] {
                    for (a, b) in group[0].iter().zip(other) {
                        assert!((a - b).abs() < 1e-10);
                    }
                }
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 100);
}

#[test]
fn pure_and_k_correlation_agree_with_dense_path() {
    let mut rng = substream(106, 0);
    for case in 0..50 {
        let n = 2 + case % 2;
        let dims = vec![2; n];
        let ds = sample_device_set::<f64>(&dims, 3, case as u64).unwrap();
        let amps: Vec<C64> =
            (0..1 << n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let psi = PureState::normalized(dims.clone(), amps).unwrap();
        let dense = correlation(&psi.to_density(), &ds).unwrap().values;
        let pure = correlation_pure(&psi, &ds).unwrap().values;
        for (a, b) in dense.iter().zip(&pure) {
            assert!((a - b).abs() < 1e-10);
        }
        let outcomes = 1 << n;
        for k in 1..=3 {
            let kc = k_correlation(&psi, &ds, k).unwrap().values;
            assert_eq!(kc.len(), k * outcomes);
            for x in 0..k {
                // diagonal setting (x, …, x) has rank Σ x·3^i
                let s: usize = (0..n).fold(0, |acc, _| acc * 3 + x);
                assert_eq!(&kc[x * outcomes..(x + 1) * outcomes], &pure[s * outcomes..(s + 1) * outcomes]);
            }
        }
    }
}

#[test]
fn device_files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = substream(107, 0);
    for (shape, m) in [(vec![2, 2, 2], 2), (vec![4, 4, 4], 3), (vec![2, 2, 2, 2], 16)] {
        let ds = sample_device_set::<f64>(&shape, m, rng.gen()).unwrap();
        let path = dir.path().join("devices.json");
        gme_core::measure::save_devices(&ds, &path).unwrap();
        let back: DeviceSet<f64> = gme_core::measure::load_devices(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.fingerprint(), ds.fingerprint());
        let rho: DensityMatrix<f64> = random_density_with_dims(&shape, 3, &mut rng).unwrap();
        let a = correlation(&rho, &ds).unwrap().values;
        let b = correlation(&rho, &back).unwrap().values;
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    // a non-unitary device is rejected on load
    let ds = sample_device_set::<f64>(&[2, 2], 1, 1).unwrap();
    let mut v: serde_json::Value = serde_json::from_slice(&ds.to_json()).unwrap();
    v["parties"][0][0][0] = serde_json::json!([2.0, 0.0]);
    assert!(DeviceSet::<f64>::from_json(v.to_string().as_bytes()).is_err());
}

#[test]
fn haar_unitaries_are_unitary_and_seeded() {
    let mut differ = 0;
    for seed in 0..100u64 {
        let u = gme_core::qcore::haar_unitary::<f64>(4, seed).unwrap();
        let uu = u.matmul(&u.adjoint()).unwrap();
        assert!(uu.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
        assert_eq!(u, gme_core::qcore::haar_unitary::<f64>(4, seed).unwrap());
        let v = gme_core::qcore::haar_unitary::<f64>(4, seed + 1000).unwrap();
        if u.max_abs_diff(&v) > 1e-6 {
            differ += 1;
        }
    }
    assert_eq!(differ, 100);
    let mut rng = substream(108, 0);
    assert!(sample_haar_unitary::<f64, _>(0, &mut rng).is_err());
}
