//! Certification of genuine multipartite entanglement from simulated local
//! measurement statistics.
//!
//! The numerical core is generic over the real scalar ([`scalar::Real`],
//! implemented for `f32` and `f64`); the aliases below fix the precision used
//! by the dataset pipeline.

// Numeric kernels index several arrays in lockstep; `!(x > 0.0)` rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod learn;
pub mod measure;
pub mod pipeline;
pub mod qcore;
pub mod rng;
pub mod scalar;
pub mod states;

pub use error::{Error, Result};

pub type ComplexMatrix = qcore::ComplexMatrix<f64>;
pub type DensityMatrix = qcore::DensityMatrix<f64>;
pub type PureState = qcore::PureState<f64>;
pub type DeviceSet = measure::DeviceSet<f64>;
pub type CorrelationVector = measure::CorrelationVector<f64>;
pub type FnnModel = learn::FnnModel<f32>;
