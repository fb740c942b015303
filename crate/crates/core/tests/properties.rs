//! Randomized invariants over seeds and shapes.

use gme_core::criteria::{guhne3, tensor4_criterion, vrho};
use gme_core::measure::{correlation, k_correlation, sample_device_set};
use gme_core::pipeline::{fmt_sig, round_sig, step_fit};
use gme_core::qcore::{
    embed_pad, hermitian_eigenvalues, partial_trace, partial_transpose, permute_subsystems, random_density_with_dims,
    von_neumann_entropy, DensityMatrix,
};
use gme_core::rng::substream;
use gme_core::states::{sample_biseparable, sample_fully_separable, sample_intactness};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=3, 2..=3)
}

fn state(dims: &[usize], seed: u64) -> DensityMatrix<f64> {
    let mut rng = substream(seed, 0);
    let d: usize = dims.iter().product();
    let rank = 1 + (seed as usize % d);
    random_density_with_dims(dims, rank, &mut rng).unwrap()
}

fn assert_state(rho: &DensityMatrix<f64>) {
    let m = rho.matrix();
    assert!(m.hermiticity_defect() < 1e-10);
    assert!((m.trace().re - 1.0).abs() < 1e-10);
    assert!(hermitian_eigenvalues(m).unwrap()[0] >= -1e-9);
}

fn sorted_spectrum(rho: &DensityMatrix<f64>) -> Vec<f64> {
    let mut v = rho.eigenvalues();
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permutation_preserves_spectrum(dims in dims_strategy(), seed in any::<u64>(), perm_seed in any::<u64>()) {
        let rho = state(&dims, seed);
        let mut perm: Vec<usize> = (0..dims.len()).collect();
        let mut rng = substream(perm_seed, 0);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let out = permute_subsystems(&rho, &perm).unwrap();
        let expect_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
        prop_assert_eq!(out.dims(), expect_dims.as_slice());
        for (a, b) in sorted_spectrum(&rho).iter().zip(sorted_spectrum(&out)) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn partial_transpose_keeps_separable_states_positive(dims in dims_strategy(), seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let subset = vec![pick.index(dims.len())];
        let pt = partial_transpose(&state(&dims, seed), &subset).unwrap();
        prop_assert!(pt.hermiticity_defect() < 1e-12);
        prop_assert!((pt.trace().re - 1.0).abs() < 1e-10);
        let sep = sample_fully_separable::<f64>(&dims, seed).unwrap();
        let pt = partial_transpose(&sep, &subset).unwrap();
        prop_assert!(hermitian_eigenvalues(&pt).unwrap()[0] >= -1e-10);
    }

    #[test]
    fn entropy_is_additive(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = state(&[2, 2], s1);
        let b = state(&[2, 2], s2);
        let joint = von_neumann_entropy(&a.tensor(&b));
        prop_assert!((joint - von_neumann_entropy(&a) - von_neumann_entropy(&b)).abs() < 1e-8);
    }

    #[test]
    fn reduced_states_are_states(dims in dims_strategy(), seed in any::<u64>(), keep in subsequence(vec![0usize, 1, 2], 1..=2)) {
        let rho = state(&dims, seed);
        let keep: Vec<usize> = keep.into_iter().filter(|&k| k < dims.len()).collect();
        prop_assume!(!keep.is_empty());
        let r = partial_trace(&rho, &keep).unwrap();
        assert_state(&r);
    }

    #[test]
    fn padding_adds_only_zero_eigenvalues(dims in dims_strategy(), seed in any::<u64>()) {
        let rho = state(&dims, seed);
        let padded: Vec<usize> = dims.iter().map(|d| d + 1).collect();
        let out = embed_pad(&rho, &padded).unwrap();
        assert_state(&out);
        let mut expect = sorted_spectrum(&rho);
        expect.resize(out.dim(), 0.0);
        expect.sort_by(f64::total_cmp);
        for (a, b) in expect.iter().zip(sorted_spectrum(&out)) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn samplers_produce_valid_states(seed in any::<u64>()) {
        assert_state(&sample_biseparable::<f64>(&[2, 2, 2], seed).unwrap());
        assert_state(&sample_fully_separable::<f64>(&[2, 3, 2], seed).unwrap());
        assert_state(&sample_intactness::<f64>(&[2, 2, 2, 2], 3, seed).unwrap());
    }

    #[test]
    fn biseparable_samples_are_never_detected(seed in any::<u64>()) {
        let q3 = sample_biseparable::<f64>(&[2, 2, 2], seed).unwrap();
        prop_assert!(!guhne3(&q3).unwrap().detected);
        prop_assert!(!vrho(&q3).unwrap().detected);
        let q4 = sample_biseparable::<f64>(&[2, 2, 2, 2], seed).unwrap();
        prop_assert!(!tensor4_criterion(&q4).unwrap().detected);
    }

    #[test]
    fn correlation_tables_are_distributions(dims in dims_strategy(), seed in any::<u64>(), m in 1usize..=3) {
        let ds = sample_device_set::<f64>(&dims, m, seed).unwrap();
        let rho = state(&dims, seed ^ 0x55);
        let c = correlation(&rho, &ds).unwrap().values;
        let outcomes: usize = dims.iter().product();
        prop_assert_eq!(c.len(), ds.full_feature_len());
        for block in c.chunks(outcomes) {
            prop_assert!(block.iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
            prop_assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let k = k_correlation(&rho, &ds, m).unwrap().values;
        prop_assert_eq!(k.len(), m * outcomes);
        prop_assert_eq!(&k[..outcomes], &c[..outcomes]);
    }

    #[test]
    fn step_fit_recovers_clean_steps(n in 1usize..200, split in 0usize..200) {
        let s = split.min(n);
        let preds: Vec<bool> = (0..n).map(|i| i < s).collect();
        prop_assert_eq!(step_fit(&preds, true), s.checked_sub(1));
        let rev: Vec<bool> = preds.iter().rev().copied().collect();
        prop_assert_eq!(step_fit(&rev, false), s.checked_sub(1).map(|j| n - 1 - j));
    }

    #[test]
    fn rounding_is_stable(x in -1e12f64..1e12) {
        let r = round_sig(x);
        prop_assert_eq!(round_sig(r), r);
        prop_assert!((r - x).abs() <= 5e-9 * x.abs());
        prop_assert_eq!(fmt_sig(x).parse::<f64>().unwrap(), r);
    }
}
