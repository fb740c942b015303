use crate::error::{Error, Result};
use crate::qcore::{permute_pure, permute_subsystems, DensityMatrix, PureState};
use crate::scalar::Real;

/// Output party `k` is input party `perm[k]` of `ρ ⊗ τ`, with parties
/// `(A, C₁,₁ … C₁,ₙ, B, C₂,₁ … C₂,ₙ)` → `(A, B, C₁,₁, C₂,₁, …, C₁,ₙ, C₂,ₙ)`.
fn merge_layout(rho_dims: &[usize], tau_dims: &[usize], n_shared: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_shared == 0 || rho_dims.len() != n_shared + 1 || tau_dims.len() != n_shared + 1 {
        return Err(Error::DimensionMismatch(format!(
            "merging {rho_dims:?} with {tau_dims:?} over {n_shared} shared parties"
        )));
    }
    let n = n_shared;
    let mut perm = vec![0, n + 1];
    for j in 0..n {
        perm.push(1 + j);
        perm.push(n + 2 + j);
    }
    let mut dims = vec![rho_dims[0], tau_dims[0]];
    for j in 0..n {
        dims.push(rho_dims[1 + j] * tau_dims[1 + j]);
    }
    Ok((perm, dims))
}

/// Merges two `(n+1)`-partite states into an `(n+2)`-partite one on parties
/// `(A, B, C₁ … Cₙ)` where `Cⱼ = (C₁,ⱼ C₂,ⱼ)`. Genuine entanglement of both
/// inputs carries over to the output.
pub fn merge<T: Real>(rho: &DensityMatrix<T>, tau: &DensityMatrix<T>, n_shared: usize) -> Result<DensityMatrix<T>> {
    let (perm, dims) = merge_layout(rho.dims(), tau.dims(), n_shared)?;
    let permuted = permute_subsystems(&rho.tensor(tau), &perm)?;
    Ok(DensityMatrix::from_parts_unchecked(dims, permuted.into_matrix()))
}

pub fn merge_pure<T: Real>(psi: &PureState<T>, phi: &PureState<T>, n_shared: usize) -> Result<PureState<T>> {
    let (perm, dims) = merge_layout(psi.dims(), phi.dims(), n_shared)?;
    let mut joint_dims = psi.dims().to_vec();
    joint_dims.extend_from_slice(phi.dims());
    let joint = PureState::from_parts_unchecked(joint_dims, crate::qcore::kron_vec(psi.amplitudes(), phi.amplitudes()));
    let permuted = permute_pure(&joint, &perm)?;
    Ok(PureState::from_parts_unchecked(dims, permuted.amplitudes().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{partial_trace, random_density_with_dims};
    use crate::rng::substream;
    use crate::states::ghz;

    #[test]
    fn bell_merge_is_genuinely_entangled_pure_state() {
        let bell = ghz::<f64>(2, 2).unwrap();
        let m = merge_pure(&bell, &bell, 1).unwrap();
        assert_eq!(m.dims(), &[2, 2, 4]);
        let rho = m.to_density();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        for keep in [vec![0], vec![1], vec![2]] {
            let r = partial_trace(&rho, &keep).unwrap();
            assert!(r.purity() < 1.0 - 1e-6, "cut {keep:?}");
        }
        let dense = merge(&bell.to_density(), &bell.to_density(), 1).unwrap();
        assert!(dense.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn merged_dims_and_spectrum() {
        let mut rng = substream(4, 0);
        let a: DensityMatrix<f64> = random_density_with_dims(&[4, 2], 3, &mut rng).unwrap();
        let b: DensityMatrix<f64> = random_density_with_dims(&[4, 2], 2, &mut rng).unwrap();
        let m = merge(&a, &b, 1).unwrap();
        assert_eq!(m.dims(), &[4, 4, 4]);
        assert_eq!(m.n_parties(), 3);
        let mut expect: Vec<f64> =
            a.eigenvalues().iter().flat_map(|x| b.eigenvalues().into_iter().map(move |y| x * y)).collect();
        expect.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in m.eigenvalues().iter().zip(&expect) {
            assert!((x - y).abs() < 1e-10);
        }
        // A and B marginals survive the regrouping
        let ra = partial_trace(&m, &[0]).unwrap();
        let a_only = partial_trace(&a, &[0]).unwrap();
        assert!(ra.matrix().max_abs_diff(a_only.matrix()) < 1e-12);
    }

    #[test]
    fn four_qubit_merge_layout() {
        let g = ghz::<f64>(4, 2).unwrap();
        let m = merge_pure(&g, &g, 3).unwrap();
        assert_eq!(m.dims(), &[2, 2, 4, 4, 4]);
        assert!(merge_pure(&g, &ghz(3, 2).unwrap(), 3).is_err());
    }
}
