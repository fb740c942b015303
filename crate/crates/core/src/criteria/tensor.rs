use crate::criteria::{require_dims, CriterionId, CriterionVerdict};
use crate::error::Result;
use crate::qcore::{kyfan_norm, ComplexMatrix, DensityMatrix};
use crate::scalar::{Real, C};

/// Pauli X, Y, Z as (bit-flip, phase(row bit)) rules: σ|b⟩ = phase(b)|b ⊕ flip⟩.
fn pauli_entry<T: Real>(which: usize, row_bit: usize, col_bit: usize) -> C<T> {
    let (o, z) = (T::one(), T::zero());
    match (which, row_bit, col_bit) {
        (0, 0, 1) | (0, 1, 0) => C::new(o, z),
        (1, 0, 1) => C::new(z, -o),
        (1, 1, 0) => C::new(z, o),
        (2, 0, 0) => C::new(o, z),
        (2, 1, 1) => C::new(-o, z),
        _ => C::new(z, z),
    }
}

/// `T[a][b][c][d] = Tr(σ_a ⊗ σ_b ⊗ σ_c ⊗ σ_d ρ)` for `a…d ∈ {X, Y, Z}`,
/// flattened as `27a + 9b + 3c + d`.
pub fn correlation_tensor4<T: Real>(rho: &DensityMatrix<T>) -> Result<Vec<f64>> {
    require_dims(rho, &[2, 2, 2, 2])?;
    let m = rho.matrix();
    let mut out = vec![0.0; 81];
    for (idx, slot) in out.iter_mut().enumerate() {
        let ops = [idx / 27, (idx / 9) % 3, (idx / 3) % 3, idx % 3];
        let flip: usize = ops.iter().enumerate().filter(|(_, &o)| o != 2).map(|(q, _)| 1usize << (3 - q)).sum();
        // Tr(Pρ) = Σ_i P[i][i⊕flip] ρ[i⊕flip][i]
        let mut acc = C::new(T::zero(), T::zero());
        for i in 0..16usize {
            let j = i ^ flip;
            let mut p = C::new(T::one(), T::zero());
            for (q, &o) in ops.iter().enumerate() {
                let rb = (i >> (3 - q)) & 1;
                let cb = (j >> (3 - q)) & 1;
                p *= pauli_entry::<T>(o, rb, cb);
            }
            acc += p * m[(j, i)];
        }
        *slot = acc.re.as_f64();
    }
    Ok(out)
}

/// Detection threshold for the averaged Ky Fan k-norm.
pub fn tensor4_threshold(k: usize) -> f64 {
    if k <= 3 {
        2.0 * (k as f64).sqrt()
    } else {
        1.0 + 2.0 * k as f64 / 3.0
    }
}

/// Four-qubit correlation-tensor criterion. The three 9×9 matricizations
/// pair index 1 with index 2, 3 and 4 respectively on the rows; the margin is
/// `max_k (mean Ky Fan k-norm − threshold_k)` over `k = 1…9`.
pub fn tensor4_criterion<T: Real>(rho: &DensityMatrix<T>) -> Result<CriterionVerdict> {
    let t = correlation_tensor4(rho)?;
    let at = |a: usize, b: usize, c: usize, d: usize| t[27 * a + 9 * b + 3 * c + d];
    let unfold = |f: &dyn Fn(usize, usize, usize, usize) -> f64| {
        ComplexMatrix::<f64>::from_fn(9, 9, |r, c| C::new(f(r / 3, r % 3, c / 3, c % 3), 0.0))
    };
    // rows (i1 i2) | cols (i3 i4)
    let m12 = unfold(&|a, b, c, d| at(a, b, c, d));
    // rows (i1 i3) | cols (i2 i4)
    let m13 = unfold(&|a, c, b, d| at(a, b, c, d));
    // rows (i1 i4) | cols (i2 i3)
    let m14 = unfold(&|a, d, b, c| at(a, b, c, d));
    let mut best = f64::NEG_INFINITY;
    for k in 1..=9 {
        let norm = (kyfan_norm(&m12, k)? + kyfan_norm(&m13, k)? + kyfan_norm(&m14, k)?) / 3.0;
        best = best.max(norm - tensor4_threshold(k));
    }
    Ok(CriterionVerdict::from_margin(CriterionId::Tensor4, best))
}
