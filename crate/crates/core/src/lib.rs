//! Spectral homodyne tomography of two-mode squeezed thermal sideband states.
//!
//! The crate simulates phase-scanned homodyne traces of the upper/lower
//! sideband pair of an optical parametric oscillator, then reconstructs the
//! full two-mode covariance matrix from four mixer-phase settings plus the
//! cavity-lock readout of the sideband energy unbalance.

pub mod commands;
pub mod dsp;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod recon;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sideband;
pub mod synth;

pub use error::{Error, Result};
