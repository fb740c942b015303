use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, DensityMatrix, PureState};
use crate::scalar::{cz, Real, C};

fn basis_amplitudes<T: Real>(dims: &[usize], support: &[(usize, f64)]) -> Result<PureState<T>> {
    let d: usize = dims.iter().product();
    let mut amps = vec![cz(); d];
    for &(idx, a) in support {
        amps[idx] = C::new(T::of(a), T::zero());
    }
    PureState::normalized(dims.to_vec(), amps)
}

/// `(1/√d) Σ_{i<d} |i⟩^{⊗n}`.
pub fn ghz<T: Real>(n: usize, d: usize) -> Result<PureState<T>> {
    if n < 2 || d < 2 {
        return Err(Error::InvalidDimension(format!("GHZ with n = {n}, d = {d}")));
    }
    let dims = vec![d; n];
    // |i…i⟩ has flat index i·(1 + d + … + d^{n-1})
    let step: usize = (0..n).map(|k| d.pow(k as u32)).sum();
    let amp = 1.0 / (d as f64).sqrt();
    let support: Vec<(usize, f64)> = (0..d).map(|i| (i * step, amp)).collect();
    basis_amplitudes(&dims, &support)
}

/// Uniform superposition of the weight-one bit strings.
pub fn w<T: Real>(n: usize) -> Result<PureState<T>> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("W state with n = {n}")));
    }
    let amp = 1.0 / (n as f64).sqrt();
    let support: Vec<(usize, f64)> = (0..n).map(|k| (1 << k, amp)).collect();
    basis_amplitudes(&vec![2; n], &support)
}

/// `(|0000⟩ + |0011⟩ + |1100⟩ − |1111⟩)/2`.
pub fn cluster4<T: Real>() -> PureState<T> {
    basis_amplitudes(&[2; 4], &[(0b0000, 0.5), (0b0011, 0.5), (0b1100, 0.5), (0b1111, -0.5)])
        .expect("normalized by construction")
}

/// Four-qubit Dicke state with two excitations.
pub fn dicke24<T: Real>() -> PureState<T> {
    let a = 1.0 / 6f64.sqrt();
    let support: Vec<(usize, f64)> = (0..16usize).filter(|i| i.count_ones() == 2).map(|i| (i, a)).collect();
    basis_amplitudes(&[2; 4], &support).expect("normalized by construction")
}

/// Which component the weight `p` multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseConvention {
    /// `(1−p)·base + p·I/N`
    NoiseWeight,
    /// `p·base + (1−p)·I/N`
    StateWeight,
}

#[derive(Clone, Debug)]
pub enum MixtureBase<T> {
    Pure(PureState<T>),
    Mixed(DensityMatrix<T>),
}

#[derive(Clone, Debug)]
pub struct NoiseMixture<T> {
    pub base: MixtureBase<T>,
    pub p: T,
    pub convention: NoiseConvention,
}

/// Werner-type mixture of the base state with white noise.
pub fn mix_with_white_noise<T: Real>(m: &NoiseMixture<T>) -> Result<DensityMatrix<T>> {
    if !(m.p >= T::zero() && m.p <= T::one()) {
        return Err(Error::OutOfRange(format!("mixing weight {}", m.p)));
    }
    let base = match &m.base {
        MixtureBase::Pure(psi) => psi.to_density(),
        MixtureBase::Mixed(rho) => rho.clone(),
    };
    let noise = DensityMatrix::maximally_mixed(base.dims().to_vec())?;
    let (w_state, w_noise) = match m.convention {
        NoiseConvention::NoiseWeight => (T::one() - m.p, m.p),
        NoiseConvention::StateWeight => (m.p, T::one() - m.p),
    };
    DensityMatrix::mixture(&[(w_state, &base), (w_noise, &noise)])
}

/// `(1−α−β)/27 I + (α/3) ρ_bisep + β |GHZ₃₃⟩⟨GHZ₃₃|` on three qutrits, with
/// `ρ_bisep = |0⟩⟨0| ⊗ (|00⟩+|11⟩+|22⟩)(⟨00|+⟨11|+⟨22|)` (unnormalized).
pub fn qutrit_family<T: Real>(alpha: T, beta: T) -> Result<DensityMatrix<T>> {
    if !(alpha >= T::zero() && beta >= T::zero()) || alpha + beta > T::one() + T::tol(1e-12) {
        return Err(Error::OutOfRange(format!("(α, β) = ({alpha}, {beta})")));
    }
    let dims = vec![3, 3, 3];
    let third = T::one() / T::of(3.0);
    // (|00⟩+|11⟩+|22⟩)/√3 on BC, |0⟩ on A
    let phi: Vec<C<T>> = (0..9).map(|i| if i % 4 == 0 { C::new(third.sqrt(), T::zero()) } else { cz() }).collect();
    let mut a0 = vec![cz(); 3];
    a0[0] = C::new(T::one(), T::zero());
    let bisep = PureState::new(dims.clone(), crate::qcore::kron_vec(&a0, &phi))?.to_density();
    let ghz33 = ghz::<T>(3, 3)?.to_density();
    let noise = DensityMatrix::maximally_mixed(dims)?;
    let gamma = (T::one() - alpha - beta).max(T::zero());
    // α/3 · (3 |φ⟩⟨φ|) = α |φ⟩⟨φ|
    DensityMatrix::mixture(&[(gamma, &noise), (alpha, &bisep), (beta, &ghz33)])
}

/// Convenience: projector onto a pure state as a plain matrix.
pub fn projector<T: Real>(psi: &PureState<T>) -> ComplexMatrix<T> {
    ComplexMatrix::outer(psi.amplitudes(), psi.amplitudes())
}
