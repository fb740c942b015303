use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{sample_haar_unitary, ComplexMatrix};
use crate::rng::substream;
use crate::scalar::{Real, C};

/// Projective measurement `{|uᵏ⟩⟨uᵏ|}` given by the columns of a unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct Device<T> {
    unitary: ComplexMatrix<T>,
}

impl<T: Real> Device<T> {
    /// Validates completeness, idempotence and orthogonality of the
    /// projectors to 1e-10.
    pub fn new(unitary: ComplexMatrix<T>) -> Result<Self> {
        let dev = Self { unitary };
        dev.validate()?;
        Ok(dev)
    }

    pub fn dim(&self) -> usize {
        self.unitary.rows()
    }

    pub fn source_unitary(&self) -> &ComplexMatrix<T> {
        &self.unitary
    }

    /// Measurement vector of outcome `k`.
    pub fn outcome_vector(&self, k: usize) -> Vec<C<T>> {
        self.unitary.column(k)
    }

    pub fn projectors(&self) -> Vec<ComplexMatrix<T>> {
        (0..self.dim())
            .map(|k| {
                let u = self.outcome_vector(k);
                ComplexMatrix::outer(&u, &u)
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let d = self.unitary.rows();
        if d == 0 || !self.unitary.is_square() {
            return Err(Error::InvalidDevice(format!(
                "{}x{} measurement matrix",
                self.unitary.rows(),
                self.unitary.cols()
            )));
        }
        let tol = T::tol(1e-10);
        let ps = self.projectors();
        let mut sum = ComplexMatrix::zeros(d, d);
        for (k, p) in ps.iter().enumerate() {
            sum.add_scaled(p, T::one());
            if p.matmul(p)?.max_abs_diff(p) > tol {
                return Err(Error::InvalidDevice(format!("projector {k} is not idempotent")));
            }
            for (l, q) in ps.iter().enumerate().skip(k + 1) {
                if p.matmul(q)?.frobenius_norm() > tol {
                    return Err(Error::InvalidDevice(format!("projectors {k} and {l} overlap")));
                }
            }
        }
        if sum.max_abs_diff(&ComplexMatrix::identity(d)) > tol {
            return Err(Error::InvalidDevice("projectors do not sum to the identity".into()));
        }
        Ok(())
    }
}

/// `m` measurement devices per party, fixed for a whole experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceSet<T> {
    dims: Vec<usize>,
    m: usize,
    seed: u64,
    parties: Vec<Vec<Device<T>>>,
}

/// On-disk layout: every unitary is a row-major list of `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
struct DeviceFile {
    dims: Vec<usize>,
    m: usize,
    seed: u64,
    parties: Vec<Vec<Vec<[f64; 2]>>>,
}

impl<T: Real> DeviceSet<T> {
    pub fn new(dims: Vec<usize>, m: usize, seed: u64, parties: Vec<Vec<Device<T>>>) -> Result<Self> {
        if m == 0 {
            return Err(Error::OutOfRange("at least one device per party".into()));
        }
        if parties.len() != dims.len() {
            return Err(Error::InvalidDevice(format!("{} parties of devices for dims {dims:?}", parties.len())));
        }
        for (i, (devs, &d)) in parties.iter().zip(&dims).enumerate() {
            if devs.len() != m || devs.iter().any(|dev| dev.dim() != d) {
                return Err(Error::InvalidDevice(format!("party {i} needs {m} devices of dimension {d}")));
            }
        }
        Ok(Self { dims, m, seed, parties })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn device(&self, party: usize, setting: usize) -> &Device<T> {
        &self.parties[party][setting]
    }

    /// Full-correlation feature length `mⁿ · Π dᵢ`.
    pub fn full_feature_len(&self) -> usize {
        self.m.pow(self.dims.len() as u32) * self.dims.iter().product::<usize>()
    }

    fn to_file(&self) -> DeviceFile {
        DeviceFile {
            dims: self.dims.clone(),
            m: self.m,
            seed: self.seed,
            parties: self
                .parties
                .iter()
                .map(|devs| {
                    devs.iter()
                        .map(|d| d.unitary.data().iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect())
                        .collect()
                })
                .collect(),
        }
    }

    fn from_file(f: DeviceFile) -> Result<Self> {
        let parties = f
            .parties
            .iter()
            .zip(&f.dims)
            .map(|(devs, &d)| {
                devs.iter()
                    .map(|entries| {
                        let data = entries.iter().map(|&[re, im]| C::new(T::of(re), T::of(im))).collect();
                        Device::new(ComplexMatrix::from_vec(d, d, data)?)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(f.dims, f.m, f.seed, parties)
    }

    /// Canonical compact JSON.
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_file()).expect("device sets serialize")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let f: DeviceFile = serde_json::from_slice(bytes)?;
        Self::from_file(f)
    }

    /// 64-bit FNV-1a hash of the canonical JSON bytes.
    pub fn fingerprint(&self) -> u64 {
        fnv1a(&self.to_json())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read(path)?)
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// `m` Haar-random devices per party.
pub fn sample_device_set<T: Real>(dims: &[usize], m: usize, seed: u64) -> Result<DeviceSet<T>> {
    crate::qcore::total_dim(dims)?;
    if m == 0 {
        return Err(Error::OutOfRange("at least one device per party".into()));
    }
    let parties = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            (0..m)
                .map(|j| {
                    let mut rng = substream(seed, (i * m + j) as u64);
                    Device::new(sample_haar_unitary(d, &mut rng)?)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    DeviceSet::new(dims.to_vec(), m, seed, parties)
}

/// Rotation angle `(n+1)φ/(2n)` of the second fixed observable.
pub fn fixed_observable_angle(n: usize, phi: f64) -> f64 {
    (n as f64 + 1.0) * phi / (2.0 * n as f64)
}

/// Two fixed devices per qubit: the σ_z eigenbasis and the eigenbasis of
/// `A₊ = cos θ σ_x + sin θ σ_y` with `θ = (n+1)φ/(2n)` (outcome order +1, −1).
pub fn fixed_observable_devices<T: Real>(n: usize, phi: f64) -> Result<DeviceSet<T>> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("fixed observables need n ≥ 2, got {n}")));
    }
    let theta = fixed_observable_angle(n, phi);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (c, s) = (theta.cos() * h, theta.sin() * h);
    let z = ComplexMatrix::<T>::identity(2);
    let a_plus = ComplexMatrix::from_vec(
        2,
        2,
        vec![
            C::new(T::of(h), T::zero()),
            C::new(T::of(h), T::zero()),
            C::new(T::of(c), T::of(s)),
            C::new(T::of(-c), T::of(-s)),
        ],
    )?;
    let devs = vec![Device::new(z)?, Device::new(a_plus)?];
    DeviceSet::new(vec![2; n], 2, 0, vec![devs; n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_devices_are_complete() {
        let ds = sample_device_set::<f64>(&[2, 2, 2], 2, 7).unwrap();
        assert_eq!(ds.parties.iter().map(Vec::len).sum::<usize>(), 6);
        for p in 0..3 {
            for x in 0..2 {
                let ps = ds.device(p, x).projectors();
                let mut sum = ComplexMatrix::zeros(2, 2);
                for q in &ps {
                    sum.add_scaled(q, 1.0);
                }
                assert!(sum.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
            }
        }
        assert_eq!(ds.full_feature_len(), 64);
        assert!(sample_device_set::<f64>(&[2, 2], 0, 1).is_err());
    }

    #[test]
    fn same_seed_same_file() {
        let a = sample_device_set::<f64>(&[2, 2, 2], 2, 11).unwrap();
        let b = sample_device_set::<f64>(&[2, 2, 2], 2, 11).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = sample_device_set::<f64>(&[2, 2, 2], 2, 12).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let a = sample_device_set::<f64>(&[2, 3], 3, 5).unwrap();
        let b = DeviceSet::<f64>::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn broken_device_is_rejected() {
        let a = sample_device_set::<f64>(&[2], 1, 5).unwrap();
        let mut f = a.to_file();
        f.parties[0][0][0] = [0.9, 0.0];
        let bytes = serde_json::to_vec(&f).unwrap();
        assert!(matches!(DeviceSet::<f64>::from_json(&bytes), Err(Error::InvalidDevice(_))));
        assert!(DeviceSet::<f64>::from_json(b"{\"dims\":[2]}").is_err());
    }

    #[test]
    fn fixed_observables() {
        let ds = fixed_observable_devices::<f64>(4, 1.1055).unwrap();
        let z = ds.device(0, 0).projectors();
        assert!(z[0].max_abs_diff(&ComplexMatrix::from_real_diag(&[1.0, 0.0])) < 1e-15);
        assert!(z[1].max_abs_diff(&ComplexMatrix::from_real_diag(&[0.0, 1.0])) < 1e-15);
        assert!((fixed_observable_angle(4, 1.1055) - 0.690_937_5).abs() < 1e-12);
        assert!((fixed_observable_angle(4, 1.1055) - 5.0 * 1.1055 / 8.0).abs() < 1e-15);

        // A₊ = P₊ − P₋ has eigenvalues ±1 and matches cos θ σ_x + sin θ σ_y
        let th = fixed_observable_angle(4, 1.1055);
        let ps = ds.device(2, 1).projectors();
        let a = ps[0].sub(&ps[1]);
        let expect = ComplexMatrix::from_vec(
            2,
            2,
            vec![C::new(0.0, 0.0), C::new(th.cos(), -th.sin()), C::new(th.cos(), th.sin()), C::new(0.0, 0.0)],
        )
        .unwrap();
        assert!(a.max_abs_diff(&expect) < 1e-15);
        let ev = crate::qcore::hermitian_eigenvalues(&a).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }
}
