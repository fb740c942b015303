//! Random states with a prescribed separability structure.

use rand::Rng;

use crate::error::{Error, Result};
use crate::qcore::{
    haar_vector, min_eigenvalue, partial_transpose, permute_subsystems, random_density_with_dims, simplex_weights,
    total_dim, ComplexMatrix, DensityMatrix,
};
use crate::rng::substream;
use crate::scalar::Real;

/// Partial-transpose eigenvalue below which a block counts as NPT.
pub const NPT_THRESHOLD: f64 = -1e-8;

/// Rejection cap for NPT block sampling; reached only for degenerate dims.
const MAX_BLOCK_ATTEMPTS: usize = 100_000;

/// Every partition of `0..n` into exactly `k` nonempty blocks, each block
/// sorted, blocks ordered by their smallest element.
pub fn set_partitions(n: usize, k: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    // restricted growth strings
    let mut a = vec![0usize; n];
    fn rec(i: usize, max: usize, n: usize, k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            if max + 1 == k {
                let mut blocks = vec![Vec::new(); k];
                for (party, &b) in a.iter().enumerate() {
                    blocks[b].push(party);
                }
                out.push(blocks);
            }
            return;
        }
        let remaining = n - i;
        for b in 0..=(max + 1).min(k - 1) {
            let new_max = max.max(b);
            // not enough parties left to open the missing blocks
            if k - 1 - new_max > remaining - 1 {
                continue;
            }
            a[i] = b;
            rec(i + 1, new_max, n, k, a, out);
        }
    }
    rec(1, 0, n, k, &mut a, &mut out);
    out
}

/// Whether some bipartition of the state's parties has a partial transpose
/// with an eigenvalue below [`NPT_THRESHOLD`].
pub fn has_npt_cut<T: Real>(rho: &DensityMatrix<T>) -> bool {
    let n = rho.n_parties();
    if n < 2 {
        return false;
    }
    // cuts containing party 0, excluding the full set
    for mask in 1..(1usize << (n - 1)) {
        let subset: Vec<usize> = (1..n).filter(|&i| mask & (1 << (i - 1)) != 0).collect();
        let pt = partial_transpose(rho, &subset).expect("proper cut");
        if min_eigenvalue(&pt).expect("Hermitian").as_f64() < NPT_THRESHOLD {
            return true;
        }
    }
    false
}

/// Full-rank random state on `dims` (eigenvalues uniform on the whole
/// simplex); multi-party blocks are redrawn until NPT.
fn sample_block<T: Real, R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<DensityMatrix<T>> {
    let d = total_dim(dims)?;
    for _ in 0..MAX_BLOCK_ATTEMPTS {
        let rho = random_density_with_dims(dims, d, rng)?;
        if dims.len() == 1 || has_npt_cut(&rho) {
            return Ok(rho);
        }
    }
    Err(Error::OutOfRange(format!("no NPT state found on dims {dims:?}")))
}

/// Tensor product of block states, reordered to party order.
fn assemble_blocks<T: Real>(blocks: &[Vec<usize>], states: &[DensityMatrix<T>], n: usize) -> Result<DensityMatrix<T>> {
    let mut acc = states[0].clone();
    for s in &states[1..] {
        acc = acc.tensor(s);
    }
    let order: Vec<usize> = blocks.iter().flatten().copied().collect();
    // output party k sits at position pos[k] of the concatenated order
    let mut perm = vec![0; n];
    for (pos, &party) in order.iter().enumerate() {
        perm[party] = pos;
    }
    permute_subsystems(&acc, &perm)
}

/// `Σ_k q_k ⊗_i |φ_k^i⟩⟨φ_k^i|` with `K` uniform in `[1, Π dᵢ]`.
pub fn sample_fully_separable<T: Real>(dims: &[usize], seed: u64) -> Result<DensityMatrix<T>> {
    sample_fully_separable_from(dims, &mut substream(seed, 0))
}

pub fn sample_fully_separable_from<T: Real, R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<DensityMatrix<T>> {
    let d = total_dim(dims)?;
    let k = rng.gen_range(1..=d);
    sample_separable_terms(dims, k, rng)
}

/// Fully separable mixture with exactly `terms` product components.
pub fn sample_separable_terms<T: Real, R: Rng + ?Sized>(
    dims: &[usize],
    terms: usize,
    rng: &mut R,
) -> Result<DensityMatrix<T>> {
    let d = total_dim(dims)?;
    let q: Vec<T> = simplex_weights(terms, rng);
    let mut acc = ComplexMatrix::zeros(d, d);
    for &w in &q {
        let mut v = vec![crate::scalar::cone::<T>()];
        for &di in dims {
            v = crate::qcore::kron_vec(&v, &haar_vector::<T, _>(di, rng));
        }
        for i in 0..d {
            let a = v[i] * w;
            for j in 0..d {
                acc[(i, j)] += a * v[j].conj();
            }
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(dims.to_vec(), acc))
}

/// Mixture of k-block products over every partition of the parties into
/// exactly `k` blocks, with simplex weights; multi-party blocks are NPT.
pub fn sample_intactness<T: Real>(dims: &[usize], k: usize, seed: u64) -> Result<DensityMatrix<T>> {
    sample_intactness_from(dims, k, &mut substream(seed, 0))
}

pub fn sample_intactness_from<T: Real, R: Rng + ?Sized>(
    dims: &[usize],
    k: usize,
    rng: &mut R,
) -> Result<DensityMatrix<T>> {
    let n = dims.len();
    total_dim(dims)?;
    if k < 2 || k > n {
        return Err(Error::OutOfRange(format!("intactness {k} for {n} parties")));
    }
    if k == n {
        return sample_fully_separable_from(dims, rng);
    }
    let partitions = set_partitions(n, k);
    let weights: Vec<T> = simplex_weights(partitions.len(), rng);
    let d: usize = dims.iter().product();
    let mut acc = ComplexMatrix::zeros(d, d);
    for (blocks, &w) in partitions.iter().zip(&weights) {
        let states = blocks
            .iter()
            .map(|b| {
                let bd: Vec<usize> = b.iter().map(|&p| dims[p]).collect();
                sample_block(&bd, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let term = assemble_blocks(blocks, &states, n)?;
        acc.add_scaled(term.matrix(), w);
    }
    Ok(DensityMatrix::from_parts_unchecked(dims.to_vec(), acc))
}

/// `Σ_partitions p_P ρ_{block1} ⊗ ρ_{block2}` over all two-block partitions.
pub fn sample_biseparable<T: Real>(dims: &[usize], seed: u64) -> Result<DensityMatrix<T>> {
    sample_biseparable_from(dims, &mut substream(seed, 0))
}

pub fn sample_biseparable_from<T: Real, R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<DensityMatrix<T>> {
    if dims.len() < 3 {
        return Err(Error::OutOfRange(format!("biseparable sampling needs at least 3 parties, got {}", dims.len())));
    }
    sample_intactness_from(dims, 2, rng)
}

/// Random state on `dims` that is NPT across the first party.
pub fn sample_npt_bipartite<T: Real, R: Rng + ?Sized>(dims: &[usize; 2], rng: &mut R) -> Result<DensityMatrix<T>> {
    sample_block(dims, rng)
}
