//! Local projective measurement devices and Born-rule correlation features.

mod correlation;
mod device;

use std::path::Path;

pub use correlation::{correlation, correlation_pure, k_correlation, CorrelationVector, Layout, StateRef};
pub use device::{fixed_observable_angle, fixed_observable_devices, fnv1a, sample_device_set, Device, DeviceSet};

use crate::error::Result;
use crate::scalar::Real;

pub fn save_devices<T: Real>(ds: &DeviceSet<T>, path: impl AsRef<Path>) -> Result<()> {
    ds.save(path)
}

pub fn load_devices<T: Real>(path: impl AsRef<Path>) -> Result<DeviceSet<T>> {
    DeviceSet::load(path)
}
