use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::criteria::{CriterionId, CriterionVerdict};
use crate::error::{Error, Result};
use crate::qcore::{kron_vec, sample_haar_unitary, DensityMatrix};
use crate::scalar::{cone, Real, C};

/// Product probe `|ψ⟩ = ⊗|xᵢ⟩` with per-party replacements `|x′ᵢ⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductProbe<T> {
    pub factors: Vec<Vec<C<T>>>,
    pub flips: Vec<Vec<C<T>>>,
    pub seed: u64,
}

impl<T: Real> ProductProbe<T> {
    /// `xᵢ` and `x′ᵢ` are the first two columns of an independent Haar
    /// unitary per party, so each flip is orthogonal to its factor.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], seed: u64, rng: &mut R) -> Result<Self> {
        let mut factors = Vec::with_capacity(dims.len());
        let mut flips = Vec::with_capacity(dims.len());
        for &d in dims {
            if d < 2 {
                return Err(Error::InvalidDimension(format!("probe on a {d}-dimensional party")));
            }
            let u = sample_haar_unitary::<T, _>(d, rng)?;
            factors.push(u.column(0));
            flips.push(u.column(1));
        }
        Ok(Self { factors, flips, seed })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Vec::len).collect()
    }

    /// Product vector with the parties in `flipped` replaced by their flips.
    pub fn vector(&self, flipped: &[usize]) -> Vec<C<T>> {
        let mut v = vec![cone::<T>()];
        for (i, (x, xf)) in self.factors.iter().zip(&self.flips).enumerate() {
            let f = if flipped.contains(&i) { xf } else { x };
            v = kron_vec(&v, f);
        }
        v
    }
}

/// The three sums of the concurrence bound, evaluated through
/// `⟨Ψᵢⱼ|ρ^{⊗2}Π|Ψᵢⱼ⟩ = |⟨ψᵢ|ρ|ψⱼ⟩|²`,
/// `⟨Ψᵢⱼ|Pᵢ†ρ^{⊗2}Pᵢ|Ψᵢⱼ⟩ = ⟨ψ|ρ|ψ⟩⟨ψᵢⱼ|ρ|ψᵢⱼ⟩` and
/// `⟨Ψᵢᵢ|Pᵢ†ρ^{⊗2}Pᵢ|Ψᵢᵢ⟩ = ⟨ψᵢ|ρ|ψᵢ⟩²`.
/// Returns `(coherence, product, diagonal)` with the `(n − 2)` factor applied
/// to the last one; `F = coherence − product − diagonal`.
pub fn concurrence_fast_terms<T: Real>(rho: &DensityMatrix<T>, probe: &ProductProbe<T>) -> Result<(f64, f64, f64)> {
    if probe.dims() != rho.dims() {
        return Err(Error::DimensionMismatch(format!("probe dims {:?} vs state dims {:?}", probe.dims(), rho.dims())));
    }
    let n = rho.n_parties();
    let m = rho.matrix();
    let psi = probe.vector(&[]);
    let singles: Vec<Vec<C<T>>> = (0..n).map(|i| probe.vector(&[i])).collect();
    let rho_singles: Vec<Vec<C<T>>> = singles.iter().map(|v| m.matvec(v)).collect::<Result<_>>()?;
    let dot = |a: &[C<T>], b: &[C<T>]| -> C<T> {
        a.iter().zip(b).fold(C::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
    };
    let base = m.sandwich(&psi, &psi).re.max(T::zero()).as_f64();

    let mut coherence = 0.0;
    let mut product = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            coherence += 2.0 * dot(&singles[i], &rho_singles[j]).norm().as_f64();
            let both = probe.vector(&[i, j]);
            let pij = m.sandwich(&both, &both).re.max(T::zero()).as_f64();
            product += 2.0 * (base * pij).sqrt();
        }
    }
    let diagonal: f64 =
        (0..n).map(|i| dot(&singles[i], &rho_singles[i]).re.max(T::zero()).as_f64()).sum::<f64>() * (n as f64 - 2.0);
    Ok((coherence, product, diagonal))
}

/// Margin `F(ρ, ψ)`; a positive value certifies genuine multipartite
/// entanglement with concurrence at least `F / (√2 (n − 1))`.
pub fn concurrence_lower_bound<T: Real>(rho: &DensityMatrix<T>, probe: &ProductProbe<T>) -> Result<CriterionVerdict> {
    let (c, p, d) = concurrence_fast_terms(rho, probe)?;
    Ok(CriterionVerdict::from_margin(CriterionId::ConcurrenceLb, c - p - d))
}

/// Minimum `F` for a probe to count as a detection during labeling.
pub const PROBE_ACCEPT: f64 = 1e-6;

/// Draws up to `max_probes` random probes and returns the first whose bound
/// exceeds [`PROBE_ACCEPT`].
pub fn probe_search<T: Real, R: Rng + ?Sized>(
    rho: &DensityMatrix<T>,
    max_probes: usize,
    rng: &mut R,
) -> Result<Option<(ProductProbe<T>, CriterionVerdict)>> {
    for k in 0..max_probes {
        let probe = ProductProbe::random(rho.dims(), k as u64, rng)?;
        let v = concurrence_lower_bound(rho, &probe)?;
        if v.margin > PROBE_ACCEPT {
            return Ok(Some((probe, v)));
        }
    }
    Ok(None)
}
