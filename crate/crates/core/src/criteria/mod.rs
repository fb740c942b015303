//! Analytic certifiers of genuine multipartite entanglement and the NPT test.
//!
//! Every criterion is sufficient only: a detection certifies entanglement,
//! a non-detection says nothing.

mod concurrence;
mod tensor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{min_eigenvalue, partial_trace, partial_transpose, von_neumann_entropy, DensityMatrix};
use crate::scalar::Real;

pub use concurrence::{concurrence_fast_terms, concurrence_lower_bound, probe_search, ProductProbe, PROBE_ACCEPT};
pub use tensor::{correlation_tensor4, tensor4_criterion, tensor4_threshold};

/// Margins at or below this value are not detections.
pub const DETECTION_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionId {
    Guhne3,
    Vrho,
    ConcurrenceLb,
    Tensor4,
    Npt,
}

/// Outcome of a criterion; `margin > 0` is the criterion's detection side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub detected: bool,
    pub margin: f64,
    pub criterion: CriterionId,
}

impl CriterionVerdict {
    pub fn from_margin(criterion: CriterionId, margin: f64) -> Self {
        Self { detected: margin > DETECTION_EPS, margin, criterion }
    }
}

fn require_dims<T: Real>(rho: &DensityMatrix<T>, dims: &[usize]) -> Result<()> {
    if rho.dims() != dims {
        return Err(Error::DimensionMismatch(format!("criterion expects dims {dims:?}, got {:?}", rho.dims())));
    }
    Ok(())
}

/// Three-qubit biseparability inequality on density-matrix entries (1-based
/// indices, |000⟩ → 1 … |111⟩ → 8). Margin = LHS − RHS:
///
/// |ϱ₂₃| + |ϱ₂₅| + |ϱ₃₅| − √(ϱ₁₁ϱ₄₄) − √(ϱ₁₁ϱ₆₆) − √(ϱ₁₁ϱ₇₇) − (ϱ₂₂ + ϱ₃₃ + ϱ₅₅)/2
pub fn guhne3<T: Real>(rho: &DensityMatrix<T>) -> Result<CriterionVerdict> {
    require_dims(rho, &[2, 2, 2])?;
    let m = rho.matrix();
    let e = |i: usize, j: usize| m[(i - 1, j - 1)];
    let diag = |i: usize| e(i, i).re.max(T::zero());
    let lhs = e(2, 3).norm() + e(2, 5).norm() + e(3, 5).norm();
    let rhs = (diag(1) * diag(4)).sqrt()
        + (diag(1) * diag(6)).sqrt()
        + (diag(1) * diag(7)).sqrt()
        + T::of(0.5) * (diag(2) + diag(3) + diag(5));
    Ok(CriterionVerdict::from_margin(CriterionId::Guhne3, (lhs - rhs).as_f64()))
}

/// Entropic lower bound on the tripartite entanglement of formation:
/// `−S(A|BC) − S(B|AC) − S(C|AB) − 2 log₂ D_max`.
pub fn vrho<T: Real>(rho: &DensityMatrix<T>) -> Result<CriterionVerdict> {
    if rho.n_parties() != 3 {
        return Err(Error::DimensionMismatch(format!("entropic bound needs 3 parties, got {}", rho.n_parties())));
    }
    let s = |keep: &[usize]| -> Result<f64> { Ok(von_neumann_entropy(&partial_trace(rho, keep)?).as_f64()) };
    let s_abc = von_neumann_entropy(rho).as_f64();
    let d_max = *rho.dims().iter().max().expect("3 parties") as f64;
    let margin = s(&[0, 1])? + s(&[0, 2])? + s(&[1, 2])? - 3.0 * s_abc - 2.0 * d_max.log2();
    Ok(CriterionVerdict::from_margin(CriterionId::Vrho, margin))
}

/// Negative partial transpose across `cut`; margin = −λ_min(ρ^{T_cut}).
pub fn is_npt<T: Real>(rho: &DensityMatrix<T>, cut: &[usize]) -> Result<CriterionVerdict> {
    let pt = partial_transpose(rho, cut)?;
    let lo = min_eigenvalue(&pt)?;
    Ok(CriterionVerdict::from_margin(CriterionId::Npt, -lo.as_f64()))
}
