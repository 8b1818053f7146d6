//! Dual-band hyperspectral feature selection toolkit.
//!
//! Pipeline: calibrate raw cubes to reflectance, segment fruit pixels by
//! NDVI, reduce instances to mean spectra, exhaustively search subband
//! windows and statistical feature masks for a minimal discriminative
//! feature set, train compact classifiers on it and benchmark prediction
//! throughput against full-spectrum baselines.

pub mod classify;
pub mod dataset;
pub mod error;
pub mod features;
pub mod hsc;
pub mod matrix;
pub mod preprocess;
pub mod search;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};
