//! Simulation and analysis of a phase-preserving partial wavelength
//! converter inside a time-bin interferometer.
//!
//! The converter acts as a beamsplitter between a visible and a telecom band
//! whose splitting ratio is set by the pump power. Weak coherent pulse pairs
//! pass the converter, and each output band is analysed with an unbalanced
//! interferometer and a gated single-photon detector.
//!
//! * [`mode`]: coherent amplitudes over (band, time bin) modes.
//! * [`converter`]: pump-dependent conversion and background models.
//! * [`circuit`]: the interferometer and expected detector rates.
//! * [`detection`]: Poisson counting, TDC histograms, visibility estimates.
//! * [`analysis`]: curve fits and visibility models.
//! * [`scenario`]: end-to-end runs that write result tables, plots and a
//!   run manifest; the `freqsplit` binary is a thin wrapper around it.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod circuit;
pub mod config;
pub mod converter;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod mode;
pub mod plot;
pub mod scenario;
pub mod table;

pub use error::{Error, Result};
