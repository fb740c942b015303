use crate::error::{Error, Result};
use crate::learn::FnnModel;
use crate::measure::{correlation, correlation_pure, k_correlation, DeviceSet, Layout};
use crate::qcore::{embed_pad, embed_pad_pure, DensityMatrix, PureState};

/// How states become feature rows: a frozen device set plus a layout.
#[derive(Clone, Copy, Debug)]
pub struct FeatureMap<'a> {
    pub devices: &'a DeviceSet<f64>,
    pub layout: Layout,
}

impl<'a> FeatureMap<'a> {
    pub fn full(devices: &'a DeviceSet<f64>) -> Self {
        Self { devices, layout: Layout::Full }
    }

    pub fn kcorr(devices: &'a DeviceSet<f64>, k: usize) -> Result<Self> {
        if k == 0 || k > devices.m() {
            return Err(Error::OutOfRange(format!("k = {k} with {} devices per party", devices.m())));
        }
        Ok(Self { devices, layout: Layout::Kcorr { k } })
    }

    pub fn len(&self) -> usize {
        let outcomes: usize = self.devices.dims().iter().product();
        match self.layout {
            Layout::Full => self.devices.full_feature_len(),
            Layout::Kcorr { k } => k * outcomes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hex FNV-1a fingerprint of the device file.
    pub fn fingerprint(&self) -> String {
        format!("{:016x}", self.devices.fingerprint())
    }

    /// Errors unless `model` takes this map's features: equal input width
    /// and, when the model records one, the same device fingerprint.
    pub fn check_model<T: crate::scalar::Real>(&self, model: &FnnModel<T>) -> Result<()> {
        if model.input_dim() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "model takes {} features, device map produces {}",
                model.input_dim(),
                self.len()
            )));
        }
        match &model.device_fingerprint {
            Some(fp) if *fp != self.fingerprint() => Err(Error::FingerprintMismatch {
                expected: u64::from_str_radix(fp, 16).unwrap_or(0),
                found: self.devices.fingerprint(),
            }),
            _ => Ok(()),
        }
    }

    /// Zero-padding target when the state lives on smaller local spaces.
    fn padding(&self, dims: &[usize]) -> Result<Option<Vec<usize>>> {
        let target = self.devices.dims();
        if dims == target {
            return Ok(None);
        }
        if dims.len() != target.len() || dims.iter().zip(target).any(|(d, t)| d > t) {
            return Err(Error::DimensionMismatch(format!("state dims {dims:?}, device dims {target:?}")));
        }
        Ok(Some(target.to_vec()))
    }

    /// Features of `rho`, embedded into the device dimensions if smaller.
    pub fn dense(&self, rho: &DensityMatrix<f64>) -> Result<Vec<f64>> {
        if let Some(target) = self.padding(rho.dims())? {
            return self.dense(&embed_pad(rho, &target)?);
        }
        let c = match self.layout {
            Layout::Full => correlation(rho, self.devices)?,
            Layout::Kcorr { k } => k_correlation(rho, self.devices, k)?,
        };
        Ok(c.values)
    }

    pub fn pure(&self, psi: &PureState<f64>) -> Result<Vec<f64>> {
        if let Some(target) = self.padding(psi.dims())? {
            return self.pure(&embed_pad_pure(psi, &target)?);
        }
        let c = match self.layout {
            Layout::Full => correlation_pure(psi, self.devices)?,
            Layout::Kcorr { k } => k_correlation(psi, self.devices, k)?,
        };
        Ok(c.values)
    }
}

pub(crate) fn to_f32(v: &[f64]) -> Vec<f32> {
    // features are probabilities; the f32 cast keeps them in [0, 1]
    v.iter().map(|&x| x as f32).collect()
}
