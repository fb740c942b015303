use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::eigen::{hermitian_eigenvalues, min_eigenvalue};
use crate::qcore::matrix::{kron, kron_vec, ComplexMatrix};
use crate::scalar::{cz, Real, C};

/// Checks a dimension list and returns the total dimension.
pub fn total_dim(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidDimension(format!("subsystem dims {dims:?}")));
    }
    Ok(dims.iter().product())
}

/// Row-major strides: party 0 is most significant.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Multi-index digits of a flat basis index.
pub fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = index % dims[i];
        index /= dims[i];
    }
    out
}

/// Normalized pure state on a tensor-product space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState<T> {
    dims: Vec<usize>,
    amplitudes: Vec<C<T>>,
}

impl<T: Real> PureState<T> {
    pub fn new(dims: Vec<usize>, amplitudes: Vec<C<T>>) -> Result<Self> {
        let d = total_dim(&dims)?;
        if amplitudes.len() != d {
            return Err(Error::DimensionMismatch(format!("{} amplitudes for dims {dims:?}", amplitudes.len())));
        }
        let norm: T = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - T::one()).abs() > T::tol(1e-10) {
            return Err(Error::OutOfRange(format!("squared norm {norm} is not 1")));
        }
        Ok(Self { dims, amplitudes })
    }

    /// Normalizes `amplitudes` before validation.
    pub fn normalized(dims: Vec<usize>, amplitudes: Vec<C<T>>) -> Result<Self> {
        let norm: T = amplitudes.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(Error::OutOfRange("zero vector".into()));
        }
        Self::new(dims, amplitudes.into_iter().map(|a| a / norm).collect())
    }

    /// Tensor product of normalized single-party vectors.
    pub fn product(factors: &[Vec<C<T>>]) -> Result<Self> {
        let dims: Vec<usize> = factors.iter().map(Vec::len).collect();
        let mut amps = vec![C::new(T::one(), T::zero())];
        for f in factors {
            amps = kron_vec(&amps, f);
        }
        Self::normalized(dims, amps)
    }

    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, amplitudes: Vec<C<T>>) -> Self {
        Self { dims, amplitudes }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amplitudes
    }

    pub fn inner(&self, other: &Self) -> C<T> {
        self.amplitudes.iter().zip(&other.amplitudes).fold(cz(), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn to_density(&self) -> DensityMatrix<T> {
        DensityMatrix { dims: self.dims.clone(), matrix: ComplexMatrix::outer(&self.amplitudes, &self.amplitudes) }
    }
}

/// Hermitian, unit-trace, positive semidefinite operator with an explicit
/// subsystem structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix<T> {
    dims: Vec<usize>,
    matrix: ComplexMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validating constructor: Hermitian to 1e-10, trace 1 ± 1e-10,
    /// smallest eigenvalue ≥ −1e-9.
    pub fn new(dims: Vec<usize>, matrix: ComplexMatrix<T>) -> Result<Self> {
        let d = total_dim(&dims)?;
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for dims {dims:?}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let defect = matrix.hermiticity_defect();
        if defect > T::tol(1e-10) {
            return Err(Error::NotHermitian(defect.as_f64()));
        }
        let tr = matrix.trace().re;
        if (tr - T::one()).abs() > T::tol(1e-10) {
            return Err(Error::InvalidTrace(tr.as_f64()));
        }
        let lo = min_eigenvalue(&matrix)?;
        if lo < -T::tol(1e-9) {
            return Err(Error::NotPositive(lo.as_f64()));
        }
        Ok(Self { dims, matrix })
    }

    /// For operations that preserve the invariants by construction (convex
    /// mixtures, permutations, partial traces of valid states).
    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, matrix: ComplexMatrix<T>) -> Self {
        debug_assert_eq!(matrix.rows(), dims.iter().product::<usize>());
        debug_assert!(matrix.hermiticity_defect() <= T::tol(1e-8));
        debug_assert!((matrix.trace().re - T::one()).abs() <= T::tol(1e-8));
        Self { dims, matrix }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let d = total_dim(&dims)?;
        let m = ComplexMatrix::identity(d).scale(T::one() / T::of(d as f64));
        Ok(Self { dims, matrix: m })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.matrix
    }

    pub fn purity(&self) -> T {
        self.matrix.trace_product_re(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        hermitian_eigenvalues(&self.matrix).expect("density matrices are Hermitian")
    }

    /// `Σ wᵢ ρᵢ` over states with equal dims. Weights must be a probability vector.
    pub fn mixture(parts: &[(T, &DensityMatrix<T>)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::OutOfRange("empty mixture".into()))?.1;
        let mut acc = ComplexMatrix::zeros(first.dim(), first.dim());
        let mut total = T::zero();
        for &(w, rho) in parts {
            if rho.dims != first.dims {
                return Err(Error::DimensionMismatch(format!("mixing dims {:?} with {:?}", rho.dims, first.dims)));
            }
            if w < T::zero() {
                return Err(Error::OutOfRange(format!("negative weight {w}")));
            }
            acc.add_scaled(&rho.matrix, w);
            total += w;
        }
        if (total - T::one()).abs() > T::tol(1e-10) {
            return Err(Error::OutOfRange(format!("weights sum to {total}")));
        }
        Ok(Self::from_parts_unchecked(first.dims.clone(), acc))
    }

    /// `ρ ⊗ σ`, parties of `self` first.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::from_parts_unchecked(dims, kron(&self.matrix, &other.matrix))
    }

    /// `(⊗ Uᵢ) ρ (⊗ Uᵢ)†` for one unitary per party.
    pub fn local_unitary(&self, unitaries: &[ComplexMatrix<T>]) -> Result<Self> {
        if unitaries.len() != self.dims.len()
            || unitaries.iter().zip(&self.dims).any(|(u, &d)| u.rows() != d || u.cols() != d)
        {
            return Err(Error::DimensionMismatch("one unitary per party required".into()));
        }
        let mut u = ComplexMatrix::identity(1);
        for f in unitaries {
            u = kron(&u, f);
        }
        let m = u.matmul(&self.matrix)?.matmul(&u.adjoint())?;
        Ok(Self::from_parts_unchecked(self.dims.clone(), hermitize(m)))
    }

    pub fn cast<U: Real>(&self) -> DensityMatrix<U> {
        DensityMatrix { dims: self.dims.clone(), matrix: self.matrix.cast() }
    }
}

/// Replaces `m` by `(m + m†)/2`.
pub(crate) fn hermitize<T: Real>(m: ComplexMatrix<T>) -> ComplexMatrix<T> {
    let half = T::of(0.5);
    let n = m.rows();
    ComplexMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * half)
}

fn check_subset(set: &[usize], n: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in set {
        if i >= n || mask[i] {
            return Err(Error::InvalidSubsystems(set.to_vec()));
        }
        mask[i] = true;
    }
    Ok(mask)
}

/// Splits every flat index into the contributions of the masked and the
/// unmasked subsystems (both in full-index units).
fn split_indices(dims: &[usize], mask: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let st = strides(dims);
    let d: usize = dims.iter().product();
    let mut masked = vec![0; d];
    let mut rest = vec![0; d];
    for idx in 0..d {
        let dg = digits(idx, dims);
        for (k, &x) in dg.iter().enumerate() {
            if mask[k] {
                masked[idx] += x * st[k];
            } else {
                rest[idx] += x * st[k];
            }
        }
    }
    (masked, rest)
}

/// Reorders subsystems: output party `k` is input party `perm[k]`.
pub fn permute_subsystems<T: Real>(rho: &DensityMatrix<T>, perm: &[usize]) -> Result<DensityMatrix<T>> {
    let map = permutation_map(rho.dims(), perm)?;
    let d = rho.dim();
    let mut out = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(map[i], map[j])] = rho.matrix()[(i, j)];
        }
    }
    let dims = perm.iter().map(|&p| rho.dims()[p]).collect();
    Ok(DensityMatrix::from_parts_unchecked(dims, out))
}

/// Same reordering on a pure state.
pub fn permute_pure<T: Real>(psi: &PureState<T>, perm: &[usize]) -> Result<PureState<T>> {
    let map = permutation_map(psi.dims(), perm)?;
    let mut amps = vec![cz(); psi.dim()];
    for (i, &a) in psi.amplitudes().iter().enumerate() {
        amps[map[i]] = a;
    }
    let dims = perm.iter().map(|&p| psi.dims()[p]).collect();
    Ok(PureState::from_parts_unchecked(dims, amps))
}

/// Maps old flat indices to new flat indices under a subsystem permutation.
fn permutation_map(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    let n = dims.len();
    if perm.len() != n {
        return Err(Error::InvalidPermutation(perm.to_vec()));
    }
    check_subset(perm, n).map_err(|_| Error::InvalidPermutation(perm.to_vec()))?;
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let new_st = strides(&new_dims);
    // old party perm[k] lands at new position k
    let mut pos = vec![0; n];
    for (k, &p) in perm.iter().enumerate() {
        pos[p] = k;
    }
    let d: usize = dims.iter().product();
    Ok((0..d).map(|idx| digits(idx, dims).iter().enumerate().map(|(party, &x)| x * new_st[pos[party]]).sum()).collect())
}

/// Reduced state on the subsystems in `keep` (kept in ascending order).
pub fn partial_trace<T: Real>(rho: &DensityMatrix<T>, keep: &[usize]) -> Result<DensityMatrix<T>> {
    if keep.is_empty() {
        return Err(Error::InvalidSubsystems(keep.to_vec()));
    }
    let mask = check_subset(keep, rho.n_parties())?;
    let dims = rho.dims();
    let keep_dims: Vec<usize> = (0..dims.len()).filter(|&k| mask[k]).map(|k| dims[k]).collect();
    let trace_dims: Vec<usize> = (0..dims.len()).filter(|&k| !mask[k]).map(|k| dims[k]).collect();
    let dk: usize = keep_dims.iter().product();
    let dt: usize = trace_dims.iter().product();

    // full index of (kept index, traced index)
    let st = strides(dims);
    let mut full = vec![0usize; dk * dt];
    for (i, slot) in full.iter_mut().enumerate() {
        let (a, b) = (i / dt, i % dt);
        let ka = digits(a, &keep_dims);
        let tb = digits(b, &trace_dims);
        let (mut ki, mut ti) = (0, 0);
        let mut idx = 0;
        for (party, &s) in st.iter().enumerate() {
            let x = if mask[party] {
                ki += 1;
                ka[ki - 1]
            } else {
                ti += 1;
                tb[ti - 1]
            };
            idx += x * s;
        }
        *slot = idx;
    }
    let m = rho.matrix();
    let out = ComplexMatrix::from_fn(dk, dk, |a, c| {
        (0..dt).fold(cz(), |acc, b| acc + m[(full[a * dt + b], full[c * dt + b])])
    });
    Ok(DensityMatrix::from_parts_unchecked(keep_dims, out))
}

/// Transpose on the tensor factors listed in `subset`.
pub fn partial_transpose<T: Real>(rho: &DensityMatrix<T>, subset: &[usize]) -> Result<ComplexMatrix<T>> {
    let n = rho.n_parties();
    if subset.is_empty() || subset.len() >= n {
        return Err(Error::InvalidSubsystems(subset.to_vec()));
    }
    let mask = check_subset(subset, n)?;
    Ok(partial_transpose_matrix(rho.matrix(), rho.dims(), &mask))
}

pub(crate) fn partial_transpose_matrix<T: Real>(
    m: &ComplexMatrix<T>,
    dims: &[usize],
    mask: &[bool],
) -> ComplexMatrix<T> {
    let (a, b) = split_indices(dims, mask);
    let d = m.rows();
    ComplexMatrix::from_fn(d, d, |i, j| m[(a[j] + b[i], a[i] + b[j])])
}

/// Embeds each factor into a larger space; old basis vectors map to the
/// first `dims[i]` basis vectors of the enlarged factor.
pub fn embed_pad<T: Real>(rho: &DensityMatrix<T>, new_dims: &[usize]) -> Result<DensityMatrix<T>> {
    let map = embedding_map(rho.dims(), new_dims)?;
    let d_new: usize = new_dims.iter().product();
    let mut out = ComplexMatrix::zeros(d_new, d_new);
    let m = rho.matrix();
    for (i, &ni) in map.iter().enumerate() {
        for (j, &nj) in map.iter().enumerate() {
            out[(ni, nj)] = m[(i, j)];
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(new_dims.to_vec(), out))
}

pub fn embed_pad_pure<T: Real>(psi: &PureState<T>, new_dims: &[usize]) -> Result<PureState<T>> {
    let map = embedding_map(psi.dims(), new_dims)?;
    let mut amps = vec![cz(); new_dims.iter().product()];
    for (i, &a) in psi.amplitudes().iter().enumerate() {
        amps[map[i]] = a;
    }
    Ok(PureState::from_parts_unchecked(new_dims.to_vec(), amps))
}

fn embedding_map(dims: &[usize], new_dims: &[usize]) -> Result<Vec<usize>> {
    if new_dims.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!("embedding {dims:?} into {new_dims:?}")));
    }
    total_dim(new_dims)?;
    if dims.iter().zip(new_dims).any(|(a, b)| b < a) {
        return Err(Error::InvalidDimension(format!("cannot shrink {dims:?} to {new_dims:?}")));
    }
    let st = strides(new_dims);
    let d: usize = dims.iter().product();
    Ok((0..d).map(|i| digits(i, dims).iter().zip(&st).map(|(x, s)| x * s).sum()).collect())
}

/// Von Neumann entropy in bits; eigenvalues below 1e-12 count as zero.
pub fn von_neumann_entropy<T: Real>(rho: &DensityMatrix<T>) -> T {
    let floor = T::of(1e-12);
    rho.eigenvalues().into_iter().filter(|&l| l > floor).map(|l| -l * l.log2()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::random::{random_density, RandomStateSpec};

    fn bell() -> PureState<f64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(vec![2, 2], vec![C::new(h, 0.0), cz(), cz(), C::new(h, 0.0)]).unwrap()
    }

    fn rand_state(d: usize, rank: usize, seed: u64) -> DensityMatrix<f64> {
        random_density(&RandomStateSpec { dim: d, rank, seed }).unwrap()
    }

    fn with_dims(rho: DensityMatrix<f64>, dims: Vec<usize>) -> DensityMatrix<f64> {
        DensityMatrix::new(dims, rho.into_matrix()).unwrap()
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let m = ComplexMatrix::<f64>::from_real_diag(&[0.5, 0.6]);
        assert!(matches!(DensityMatrix::new(vec![2], m), Err(Error::InvalidTrace(_))));
        let m = ComplexMatrix::<f64>::from_real_diag(&[1.5, -0.5]);
        assert!(matches!(DensityMatrix::new(vec![2], m), Err(Error::NotPositive(_))));
        let mut m = ComplexMatrix::<f64>::from_real_diag(&[0.5, 0.5]);
        m[(0, 1)] = C::new(0.1, 0.0);
        assert!(matches!(DensityMatrix::new(vec![2], m), Err(Error::NotHermitian(_))));
        assert!(DensityMatrix::new(vec![3], ComplexMatrix::<f64>::identity(2)).is_err());
    }

    #[test]
    fn bell_reduction_is_maximally_mixed() {
        let r = partial_trace(&bell().to_density(), &[0]).unwrap();
        let half = ComplexMatrix::<f64>::from_real_diag(&[0.5, 0.5]);
        assert!(r.matrix().max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn partial_trace_keep_all_is_identity_map() {
        let rho = with_dims(rand_state(8, 8, 1), vec![2, 2, 2]);
        let r = partial_trace(&rho, &[0, 1, 2]).unwrap();
        assert_eq!(r, rho);
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&rho, &[3]).is_err());
    }

    #[test]
    fn partial_trace_inverts_tensor() {
        for s in 0..100 {
            let a = with_dims(rand_state(2, 2, 10 + s), vec![2]);
            let b = with_dims(rand_state(3, 3, 500 + s), vec![3]);
            let ab = a.tensor(&b);
            let ra = partial_trace(&ab, &[0]).unwrap();
            let rb = partial_trace(&ab, &[1]).unwrap();
            assert!(ra.matrix().max_abs_diff(a.matrix()) < 1e-12);
            assert!(rb.matrix().max_abs_diff(b.matrix()) < 1e-12);
        }
    }

    #[test]
    fn partial_transpose_of_bell() {
        let pt = partial_transpose(&bell().to_density(), &[1]).unwrap();
        let lo = min_eigenvalue(&pt).unwrap();
        assert!((lo + 0.5).abs() < 1e-10);
        let rho = bell().to_density();
        assert!(partial_transpose(&rho, &[]).is_err());
        assert!(partial_transpose(&rho, &[0, 1]).is_err());
    }

    #[test]
    fn partial_transpose_involution_and_product_positivity() {
        let rho = with_dims(rand_state(8, 4, 3), vec![2, 2, 2]);
        let once = partial_transpose(&rho, &[0, 2]).unwrap();
        let twice = partial_transpose(&DensityMatrix::from_parts_unchecked(vec![2, 2, 2], once), &[0, 2]).unwrap();
        assert!(twice.max_abs_diff(rho.matrix()) < 1e-15);

        let a = with_dims(rand_state(2, 2, 4), vec![2]);
        let b = with_dims(rand_state(4, 3, 5), vec![2, 2]);
        let prod = a.tensor(&b);
        let pt = partial_transpose(&prod, &[0]).unwrap();
        assert!(min_eigenvalue(&pt).unwrap() > -1e-12);
    }

    #[test]
    fn permutation_properties() {
        let a = with_dims(rand_state(2, 2, 6), vec![2]);
        let b = with_dims(rand_state(3, 2, 7), vec![3]);
        let ab = a.tensor(&b);
        assert_eq!(permute_subsystems(&ab, &[0, 1]).unwrap(), ab);
        let swapped = permute_subsystems(&ab, &[1, 0]).unwrap();
        assert!(swapped.matrix().max_abs_diff(b.tensor(&a).matrix()) < 1e-15);
        assert_eq!(swapped.dims(), &[3, 2]);

        let rho = with_dims(rand_state(12, 6, 8), vec![2, 3, 2]);
        let t = permute_subsystems(&rho, &[2, 1, 0]).unwrap();
        let back = permute_subsystems(&t, &[2, 1, 0]).unwrap();
        assert_eq!(back, rho);
        let e0 = rho.eigenvalues();
        let e1 = permute_subsystems(&rho, &[1, 2, 0]).unwrap().eigenvalues();
        for (x, y) in e0.iter().zip(&e1) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(permute_subsystems(&rho, &[0, 0, 1]).is_err());
        assert!(permute_subsystems(&rho, &[0, 1]).is_err());
    }

    #[test]
    fn entropy_values() {
        let mixed = DensityMatrix::<f64>::maximally_mixed(vec![2, 2, 2]).unwrap();
        assert!((von_neumann_entropy(&mixed) - 3.0).abs() < 1e-12);
        assert!(von_neumann_entropy(&bell().to_density()).abs() < 1e-10);
        for s in 0..10 {
            let a = with_dims(rand_state(4, 4, 20 + s), vec![2, 2]);
            let b = with_dims(rand_state(4, 3, 40 + s), vec![2, 2]);
            let sum = von_neumann_entropy(&a) + von_neumann_entropy(&b);
            assert!((von_neumann_entropy(&a.tensor(&b)) - sum).abs() < 1e-8);
        }
    }

    #[test]
    fn embedding() {
        let q = DensityMatrix::<f64>::maximally_mixed(vec![3]).unwrap();
        let e = embed_pad(&q, &[4]).unwrap();
        let third = 1.0 / 3.0;
        let expect = ComplexMatrix::from_real_diag(&[third, third, third, 0.0]);
        assert!(e.matrix().max_abs_diff(&expect) < 1e-15);
        assert!(embed_pad(&e, &[3]).is_err());

        let rho = with_dims(rand_state(6, 6, 9), vec![2, 3]);
        assert_eq!(embed_pad(&rho, &[2, 3]).unwrap(), rho);
        let big = embed_pad(&rho, &[3, 4]).unwrap();
        let mut ev_small = rho.eigenvalues();
        ev_small.extend(std::iter::repeat_n(0.0, 6));
        ev_small.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in big.eigenvalues().iter().zip(&ev_small) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
