//! Burn-assessment imaging pipeline.
//!
//! Simulated raster hyperspectral acquisition with dark/white calibration,
//! spectral preprocessing, physiological index maps (DTWI, StO2), laser
//! speckle contrast perfusion maps, concrete-autoencoder band selection and
//! unsupervised burn-severity clustering.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod cae;
pub mod cluster;
pub mod error;
pub mod lsci;
pub mod numeric;
pub mod physio;
pub mod preprocess;
pub mod spectral;

pub use error::{Error, ErrorClass, Result};
