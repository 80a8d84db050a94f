//! Wavelet-based association testing between per-base count profiles and
//! genotype dosages, with permutation calibration, effect-size reconstruction,
//! fixed-window baselines, and a scenario simulator.

pub mod baseline;
pub mod bf;
pub mod effects;
pub mod error;
pub mod hiermodel;
pub mod preprocess;
pub mod scan;
pub mod simulate;
pub mod seeds;
pub mod wavelet;

pub use error::{Error, Result};
