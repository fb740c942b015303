//! Haar-random unitaries, random spectra and random density matrices.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::matrix::ComplexMatrix;
use crate::qcore::state::DensityMatrix;
use crate::rng::substream;
use crate::scalar::{cz, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStateSpec {
    pub dim: usize,
    pub rank: usize,
    pub seed: u64,
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> C<T> {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C::new(T::of(re), T::of(im))
}

/// Haar unitary from a generator: Gram-Schmidt QR of a complex Ginibre
/// matrix. Gram-Schmidt leaves R with a positive real diagonal, which is
/// the phase fix that makes Q exactly Haar distributed.
pub fn sample_haar_unitary<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<ComplexMatrix<T>> {
    if d == 0 {
        return Err(Error::InvalidDimension("unitary of dimension 0".into()));
    }
    let mut cols: Vec<Vec<C<T>>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<C<T>> = (0..d).map(|_| gaussian(rng)).collect();
        // two passes of modified Gram-Schmidt for orthogonality at working precision
        for _ in 0..2 {
            for q in &cols {
                let proj = q.iter().zip(&v).fold(cz(), |acc, (a, b)| acc + a.conj() * b);
                for (x, a) in v.iter_mut().zip(q) {
                    *x -= *a * proj;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm <= T::tol(1e-12) {
            continue;
        }
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    Ok(ComplexMatrix::from_fn(d, d, |i, j| cols[j][i]))
}

/// Haar unitary determined by `seed`.
pub fn haar_unitary<T: Real>(d: usize, seed: u64) -> Result<ComplexMatrix<T>> {
    sample_haar_unitary(d, &mut substream(seed, 0))
}

/// Uniformly random unit vector (first column of a Haar unitary in law).
pub fn haar_vector<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C<T>> {
    loop {
        let v: Vec<C<T>> = (0..d).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm > T::tol(1e-12) {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Uniform sample from the probability simplex with `k` entries
/// (normalized exponential variates).
pub fn simplex_weights<T: Real, R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<T> {
    let e: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| T::of(x / s)).collect()
}

/// `ρ = Σ λᵢ |uᵢ⟩⟨uᵢ|` with λ uniform on the simplex over `rank` entries
/// and `|uᵢ⟩` the columns of a Haar unitary. Returned with dims `[dim]`.
pub fn random_density<T: Real>(spec: &RandomStateSpec) -> Result<DensityMatrix<T>> {
    let mut rng = substream(spec.seed, 0);
    random_density_from(spec.dim, spec.rank, &mut rng)
}

pub fn random_density_from<T: Real, R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix<T>> {
    if dim == 0 {
        return Err(Error::InvalidDimension("dimension 0".into()));
    }
    if rank == 0 || rank > dim {
        return Err(Error::OutOfRange(format!("rank {rank} for dimension {dim}")));
    }
    let lambda: Vec<T> = simplex_weights(rank, rng);
    let u: ComplexMatrix<T> = sample_haar_unitary(dim, rng)?;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (k, &l) in lambda.iter().enumerate() {
        for i in 0..dim {
            let a = u[(i, k)] * l;
            for j in 0..dim {
                m[(i, j)] += a * u[(j, k)].conj();
            }
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(vec![dim], m))
}

/// Random state with a given subsystem structure.
pub fn random_density_with_dims<T: Real, R: Rng + ?Sized>(
    dims: &[usize],
    rank: usize,
    rng: &mut R,
) -> Result<DensityMatrix<T>> {
    let d = crate::qcore::state::total_dim(dims)?;
    let rho = random_density_from(d, rank, rng)?;
    Ok(DensityMatrix::from_parts_unchecked(dims.to_vec(), rho.into_matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitarity_and_dimension_checks() {
        assert!(haar_unitary::<f64>(0, 1).is_err());
        let u1: ComplexMatrix<f64> = haar_unitary(1, 5).unwrap();
        assert!((u1[(0, 0)].norm() - 1.0).abs() < 1e-12);
        for seed in 0..20 {
            let u: ComplexMatrix<f64> = haar_unitary(4, seed).unwrap();
            let uu = u.adjoint().matmul(&u).unwrap();
            assert!(uu.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
        }
    }

    #[test]
    fn seeds_determine_output() {
        let mut distinct = 0;
        for s in 0..100u64 {
            let a: ComplexMatrix<f64> = haar_unitary(3, s).unwrap();
            let b: ComplexMatrix<f64> = haar_unitary(3, s).unwrap();
            assert_eq!(a, b);
            let c: ComplexMatrix<f64> = haar_unitary(3, s + 1000).unwrap();
            if a.max_abs_diff(&c) > 1e-6 {
                distinct += 1;
            }
        }
        assert_eq!(distinct, 100);
    }

    #[test]
    fn haar_marginal_is_uniform() {
        // |U₁₁|² ~ Uniform[0,1] for d = 2; Kolmogorov–Smirnov at α = 0.001.
        let n = 10_000;
        let mut xs: Vec<f64> = (0..n).map(|s| haar_unitary::<f64>(2, s as u64).unwrap()[(0, 0)].norm_sqr()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (x - lo).abs().max((hi - x).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.95 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn random_density_properties() {
        let pure: DensityMatrix<f64> = random_density(&RandomStateSpec { dim: 8, rank: 1, seed: 3 }).unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-10);

        let full: DensityMatrix<f64> = random_density(&RandomStateSpec { dim: 8, rank: 8, seed: 4 }).unwrap();
        let checked = DensityMatrix::new(vec![8], full.matrix().clone()).unwrap();
        assert!((checked.matrix().trace().re - 1.0).abs() < 1e-12);

        let again: DensityMatrix<f64> = random_density(&RandomStateSpec { dim: 8, rank: 8, seed: 4 }).unwrap();
        assert_eq!(full, again);

        assert!(random_density::<f64>(&RandomStateSpec { dim: 4, rank: 5, seed: 0 }).is_err());
    }
}
