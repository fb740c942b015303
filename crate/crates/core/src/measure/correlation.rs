use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::device::DeviceSet;
use crate::qcore::{DensityMatrix, PureState};
use crate::scalar::{cz, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Layout {
    /// All `Mⁿ` setting tuples.
    Full,
    /// Diagonal tuples `(x, …, x)` for `x < k`.
    Kcorr { k: usize },
}

/// Born probabilities `p(a|x)`, settings-major: entry
/// `settings_rank · Π dᵢ + outcome_rank`, party 0 most significant in both.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationVector<T> {
    pub values: Vec<T>,
    pub layout: Layout,
}

impl<T: Real> CorrelationVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|v| v.as_f64() as f32).collect()
    }
}

#[derive(Clone, Copy)]
enum Settings {
    Full,
    Diagonal(usize),
}

impl Settings {
    fn layout(self) -> Layout {
        match self {
            Settings::Full => Layout::Full,
            Settings::Diagonal(k) => Layout::Kcorr { k },
        }
    }

    fn n_tuples(self, m: usize, n: usize) -> usize {
        match self {
            Settings::Full => m.pow(n as u32),
            Settings::Diagonal(k) => k,
        }
    }
}

fn check_dims(state_dims: &[usize], ds: &DeviceSet<impl Real>) -> Result<()> {
    if state_dims != ds.dims() {
        return Err(Error::DimensionMismatch(format!("state dims {state_dims:?}, device dims {:?}", ds.dims())));
    }
    Ok(())
}

fn check_k(k: usize, ds: &DeviceSet<impl Real>) -> Result<()> {
    if k == 0 || k > ds.m() {
        return Err(Error::OutOfRange(format!("k = {k} with {} devices per party", ds.m())));
    }
    Ok(())
}

struct Walk<'a, T> {
    ds: &'a DeviceSet<T>,
    settings: Settings,
    outcomes: usize,
    out: Vec<T>,
}

impl<'a, T: Real> Walk<'a, T> {
    fn new(ds: &'a DeviceSet<T>, settings: Settings) -> Self {
        let outcomes: usize = ds.dims().iter().product();
        let len = settings.n_tuples(ds.m(), ds.n_parties()) * outcomes;
        Self { ds, settings, outcomes, out: vec![T::zero(); len] }
    }

    fn settings_at(&self, party: usize, chosen: usize) -> std::ops::Range<usize> {
        match self.settings {
            Settings::Full => 0..self.ds.m(),
            Settings::Diagonal(k) if party == 0 => 0..k,
            Settings::Diagonal(_) => chosen..chosen + 1,
        }
    }

    fn rank(&self, party: usize, rank: usize, x: usize) -> usize {
        match self.settings {
            Settings::Full => rank * self.ds.m() + x,
            Settings::Diagonal(_) if party == 0 => x,
            Settings::Diagonal(_) => rank,
        }
    }

    fn store(&mut self, setting_rank: usize, outcome_rank: usize, p: T) {
        // roundoff can leave |p| ~ 1e-16 outside [0, 1]
        self.out[setting_rank * self.outcomes + outcome_rank] = p.max(T::zero()).min(T::one());
    }

    /// `block` is the state restricted to equal digits on parties before
    /// `party`, as a `r × r` matrix on the remaining parties.
    fn dense(&mut self, block: &[C<T>], party: usize, setting_rank: usize, outcome_rank: usize, chosen: usize) {
        let dims = self.ds.dims();
        let d = dims[party];
        let r: usize = dims[party..].iter().product();
        let rr = r / d;
        for x in self.settings_at(party, chosen) {
            let u = self.ds.device(party, x).source_unitary();
            let sr = self.rank(party, setting_rank, x);
            for a in 0..d {
                let or = outcome_rank * d + a;
                // Σ_{b,c} conj(U_{ba}) U_{ca} B[(b,·),(c,·)]
                let mut next = vec![cz(); rr * rr];
                for b in 0..d {
                    let wb = u[(b, a)].conj();
                    for c in 0..d {
                        let w = wb * u[(c, a)];
                        if w.re == T::zero() && w.im == T::zero() {
                            continue;
                        }
                        for i in 0..rr {
                            let src = &block[(b * rr + i) * r + c * rr..(b * rr + i) * r + c * rr + rr];
                            let dst = &mut next[i * rr..(i + 1) * rr];
                            for (o, &s) in dst.iter_mut().zip(src) {
                                *o += w * s;
                            }
                        }
                    }
                }
                if rr == 1 {
                    self.store(sr, or, next[0].re);
                } else {
                    self.dense(&next, party + 1, sr, or, x);
                }
            }
        }
    }

    /// `amps` has been rotated on every party before `party`.
    fn pure(&mut self, amps: &[C<T>], party: usize, setting_rank: usize, chosen: usize) {
        let dims = self.ds.dims();
        let d = dims[party];
        let outer: usize = dims[..party].iter().product();
        let inner: usize = dims[party + 1..].iter().product();
        for x in self.settings_at(party, chosen) {
            let u = self.ds.device(party, x).source_unitary();
            let sr = self.rank(party, setting_rank, x);
            let mut next = vec![cz(); amps.len()];
            for o in 0..outer {
                for a in 0..d {
                    let dst = (o * d + a) * inner;
                    for b in 0..d {
                        let w = u[(b, a)].conj();
                        let src = (o * d + b) * inner;
                        for i in 0..inner {
                            next[dst + i] += w * amps[src + i];
                        }
                    }
                }
            }
            if party + 1 == dims.len() {
                for (idx, z) in next.iter().enumerate() {
                    self.store(sr, idx, z.norm_sqr());
                }
            } else {
                self.pure(&next, party + 1, sr, x);
            }
        }
    }
}

fn dense_with<T: Real>(rho: &DensityMatrix<T>, ds: &DeviceSet<T>, settings: Settings) -> Result<CorrelationVector<T>> {
    check_dims(rho.dims(), ds)?;
    let mut walk = Walk::new(ds, settings);
    walk.dense(rho.matrix().data(), 0, 0, 0, 0);
    Ok(CorrelationVector { values: walk.out, layout: settings.layout() })
}

fn pure_with<T: Real>(psi: &PureState<T>, ds: &DeviceSet<T>, settings: Settings) -> Result<CorrelationVector<T>> {
    check_dims(psi.dims(), ds)?;
    let mut walk = Walk::new(ds, settings);
    walk.pure(psi.amplitudes(), 0, 0, 0);
    Ok(CorrelationVector { values: walk.out, layout: settings.layout() })
}

/// Full correlation table `p(a|x) = Tr((⊗ P^{aᵢ}_{xᵢ}) ρ)`.
pub fn correlation<T: Real>(rho: &DensityMatrix<T>, ds: &DeviceSet<T>) -> Result<CorrelationVector<T>> {
    dense_with(rho, ds, Settings::Full)
}

/// Same table as [`correlation`] on `|ψ⟩⟨ψ|`, computed on the statevector.
pub fn correlation_pure<T: Real>(psi: &PureState<T>, ds: &DeviceSet<T>) -> Result<CorrelationVector<T>> {
    pure_with(psi, ds, Settings::Full)
}

/// Input accepted by [`k_correlation`].
#[derive(Clone, Copy)]
pub enum StateRef<'a, T> {
    Dense(&'a DensityMatrix<T>),
    Pure(&'a PureState<T>),
}

impl<'a, T> From<&'a DensityMatrix<T>> for StateRef<'a, T> {
    fn from(r: &'a DensityMatrix<T>) -> Self {
        StateRef::Dense(r)
    }
}

impl<'a, T> From<&'a PureState<T>> for StateRef<'a, T> {
    fn from(p: &'a PureState<T>) -> Self {
        StateRef::Pure(p)
    }
}

/// Diagonal-setting slice: entry `x · Π dᵢ + outcome_rank` for `x < k`.
pub fn k_correlation<'a, T: Real>(
    state: impl Into<StateRef<'a, T>>,
    ds: &DeviceSet<T>,
    k: usize,
) -> Result<CorrelationVector<T>> {
    check_k(k, ds)?;
    match state.into() {
        StateRef::Dense(rho) => dense_with(rho, ds, Settings::Diagonal(k)),
        StateRef::Pure(psi) => pure_with(psi, ds, Settings::Diagonal(k)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::device::{fixed_observable_devices, sample_device_set};
    use crate::qcore::{random_density_with_dims, PureState};
    use crate::rng::substream;
    use crate::states::{ghz, graph_state, Graph};

    #[test]
    fn maximally_mixed_gives_uniform_table() {
        let ds = sample_device_set::<f64>(&[2, 3, 2], 2, 1).unwrap();
        let rho = DensityMatrix::maximally_mixed(vec![2, 3, 2]).unwrap();
        let c = correlation(&rho, &ds).unwrap();
        assert_eq!(c.len(), 8 * 12);
        for v in &c.values {
            assert!((v - 1.0 / 12.0).abs() < 1e-14);
        }
    }

    #[test]
    fn three_qubit_feature_length() {
        let ds = sample_device_set::<f64>(&[2, 2, 2], 2, 4).unwrap();
        let rho = ghz::<f64>(3, 2).unwrap().to_density();
        assert_eq!(correlation(&rho, &ds).unwrap().len(), 64);
    }

    #[test]
    fn product_basis_state_with_z_devices() {
        // |01⟩ measured in σ_z: outcome (0,1) with certainty under setting (0,0)
        let ds = fixed_observable_devices::<f64>(2, 1.0).unwrap();
        let mut amps = vec![cz(); 4];
        amps[1] = C::new(1.0, 0.0);
        let psi = PureState::new(vec![2, 2], amps).unwrap();
        let c = correlation(&psi.to_density(), &ds).unwrap();
        assert_eq!(&c.values[..4], &[0.0, 1.0, 0.0, 0.0]);
        // setting (1,1) has A₊ eigenvectors, uniform on computational states
        for v in &c.values[12..16] {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn plus_states_with_z_devices_are_uniform() {
        let n = 4;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = vec![C::new(h, 0.0); 2];
        let psi = PureState::product(&vec![plus; n]).unwrap();
        let ds = fixed_observable_devices::<f64>(n, 1.1055).unwrap();
        let c = correlation_pure(&psi, &ds).unwrap();
        for v in &c.values[..16] {
            assert!((v - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tables_are_normalized_per_setting() {
        let mut rng = substream(9, 0);
        for dims in [vec![2, 2, 2], vec![3, 2], vec![4, 4, 4]] {
            let ds = sample_device_set::<f64>(&dims, 3, 2).unwrap();
            let d: usize = dims.iter().product();
            let rho = random_density_with_dims(&dims, d, &mut rng).unwrap();
            let c = correlation(&rho, &ds).unwrap();
            for chunk in c.values.chunks(d) {
                assert!((chunk.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(chunk.iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }
    }

    #[test]
    fn pure_path_matches_dense_path() {
        let ds = sample_device_set::<f64>(&[2, 2, 2], 2, 3).unwrap();
        let mut rng = substream(5, 0);
        for _ in 0..50 {
            let amps = crate::qcore::haar_vector(8, &mut rng);
            let psi = PureState::new(vec![2, 2, 2], amps).unwrap();
            let a = correlation(&psi.to_density(), &ds).unwrap();
            let b = correlation_pure(&psi, &ds).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn k_correlation_is_a_diagonal_slice() {
        let ds = sample_device_set::<f64>(&[2, 2, 2, 2], 5, 6).unwrap();
        let mut rng = substream(2, 2);
        let rho = random_density_with_dims(&[2, 2, 2, 2], 3, &mut rng).unwrap();
        let full = correlation(&rho, &ds).unwrap();
        let kc = k_correlation(&rho, &ds, 5).unwrap();
        assert_eq!(kc.len(), 80);
        assert_eq!(kc.layout, Layout::Kcorr { k: 5 });
        for x in 0..5 {
            let diag_rank = x * (125 + 25 + 5 + 1);
            for o in 0..16 {
                assert_eq!(kc.values[x * 16 + o], full.values[diag_rank * 16 + o]);
            }
        }
        assert!(k_correlation(&rho, &ds, 6).is_err());
        assert!(k_correlation(&rho, &ds, 0).is_err());
    }

    #[test]
    fn twelve_qubit_graph_k_correlation() {
        let g = Graph::path(12);
        let psi = graph_state::<f64>(&g).unwrap();
        let ds = sample_device_set::<f64>(&[2; 12], 4, 1).unwrap();
        let kc = k_correlation(&psi, &ds, 4).unwrap();
        assert_eq!(kc.len(), 16384);
        for chunk in kc.values.chunks(4096) {
            assert!((chunk.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let ds = sample_device_set::<f64>(&[2, 2], 2, 1).unwrap();
        let rho = DensityMatrix::maximally_mixed(vec![2, 3]).unwrap();
        assert!(matches!(correlation(&rho, &ds), Err(Error::DimensionMismatch(_))));
    }
}
