//! Cyclic Jacobi eigensolver for Hermitian matrices and one-sided Jacobi
//! singular values.

use crate::error::{Error, Result};
use crate::qcore::matrix::ComplexMatrix;
use crate::scalar::{Real, C};

const MAX_SWEEPS: usize = 60;

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix<T>,
}

fn check_hermitian<T: Real>(h: &ComplexMatrix<T>) -> Result<()> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!("eigenproblem on a {}x{} matrix", h.rows(), h.cols())));
    }
    let defect = h.hermiticity_defect();
    let scale = h.frobenius_norm().max(T::one());
    if defect > T::tol(1e-8) * scale {
        return Err(Error::NotHermitian(defect.as_f64()));
    }
    Ok(())
}

fn jacobi<T: Real>(h: &ComplexMatrix<T>, want_vectors: bool) -> (Vec<T>, Option<ComplexMatrix<T>>) {
    let n = h.rows();
    // Working copy, symmetrized.
    let mut a = ComplexMatrix::from_fn(n, n, |i, j| {
        let half = T::of(0.5);
        (h[(i, j)] + h[(j, i)].conj()) * half
    });
    let mut v = want_vectors.then(|| ComplexMatrix::identity(n));
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += a[(i, i)].norm_sqr();
            for j in (i + 1)..n {
                off += a[(i, j)].norm_sqr();
            }
        }
        if off <= eps * eps * diag.max(T::min_positive_value()) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == T::zero() {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if r <= eps * T::of(1e-3) * (app.abs() + aqq.abs()) {
                    a[(p, q)] = C::new(T::zero(), T::zero());
                    a[(q, p)] = C::new(T::zero(), T::zero());
                    continue;
                }
                // Phase that makes the (p, q) entry real, then a real rotation.
                let phase = apq / r; // e^{iφ}
                let tau = (aqq - app) / (r + r);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let pc = phase.conj(); // e^{-iφ}

                // a ← a V, V_pp = c, V_pq = s, V_qp = −s e^{-iφ}, V_qq = c e^{-iφ}
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * pc * s;
                    a[(k, q)] = akp * s + akq * pc * c;
                }
                // a ← V† a
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * phase * s;
                    a[(q, k)] = apk * s + aqk * phase * c;
                }
                a[(p, q)] = C::new(T::zero(), T::zero());
                a[(q, p)] = C::new(T::zero(), T::zero());
                a[(p, p)] = C::new(a[(p, p)].re, T::zero());
                a[(q, q)] = C::new(a[(q, q)].re, T::zero());

                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * c - vkq * pc * s;
                        v[(k, q)] = vkp * s + vkq * pc * c;
                    }
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)].re).collect(), v)
}

/// Full eigen-decomposition, eigenvalues ascending.
pub fn hermitian_eigen<T: Real>(h: &ComplexMatrix<T>) -> Result<HermitianEigen<T>> {
    check_hermitian(h)?;
    let (vals, vecs) = jacobi(h, true);
    let vecs = vecs.expect("vectors requested");
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
    let n = vals.len();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok(HermitianEigen { values: order.iter().map(|&k| vals[k]).collect(), vectors })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues<T: Real>(h: &ComplexMatrix<T>) -> Result<Vec<T>> {
    check_hermitian(h)?;
    let (mut vals, _) = jacobi(h, false);
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(vals)
}

pub fn min_eigenvalue<T: Real>(h: &ComplexMatrix<T>) -> Result<T> {
    let vals = hermitian_eigenvalues(h)?;
    vals.first().copied().ok_or_else(|| Error::InvalidDimension("empty matrix".into()))
}

/// Leading eigenvector of a Hermitian matrix.
pub fn top_eigenvector<T: Real>(h: &ComplexMatrix<T>) -> Result<(T, Vec<C<T>>)> {
    let e = hermitian_eigen(h)?;
    let k = e.values.len() - 1;
    Ok((e.values[k], e.vectors.column(k)))
}

/// Singular values in descending order (one-sided Jacobi on the columns).
pub fn singular_values<T: Real>(m: &ComplexMatrix<T>) -> Vec<T> {
    // Work on the orientation with fewer columns.
    let work = if m.cols() > m.rows() { m.adjoint() } else { m.clone() };
    let (rows, cols) = (work.rows(), work.cols());
    let mut colv: Vec<Vec<C<T>>> = (0..cols).map(|j| work.column(j)).collect();
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = C::new(T::zero(), T::zero());
                for k in 0..rows {
                    alpha += colv[p][k].norm_sqr();
                    beta += colv[q][k].norm_sqr();
                    gamma += colv[p][k].conj() * colv[q][k];
                }
                let g = gamma.norm();
                if g == T::zero() || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let pc = (gamma / g).conj();
                let zeta = (beta - alpha) / (g + g);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
                } else {
                    -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let u = colv[p][k];
                    let w = colv[q][k] * pc;
                    colv[p][k] = u * c - w * s;
                    colv[q][k] = u * s + w * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = colv.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Sum of the `k` largest singular values.
pub fn kyfan_norm<T: Real>(m: &ComplexMatrix<T>, k: usize) -> Result<T> {
    let limit = m.rows().min(m.cols());
    if k == 0 || k > limit {
        return Err(Error::OutOfRange(format!("Ky Fan index {k} outside 1..={limit}")));
    }
    Ok(singular_values(m).into_iter().take(k).sum())
}
