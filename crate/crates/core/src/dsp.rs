//! FIR filtering and decimation for the digital demodulation chain.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Fir {
    taps: Vec<f64>,
}

impl Fir {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("FIR taps must be finite and non-empty".into()));
        }
        Ok(Self { taps })
    }

    /// Moving average over `len` samples: unit DC gain, first spectral null
    /// at `sample_rate / len`.
    pub fn moving_average(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidParameter("moving average needs at least one tap".into()));
        }
        Self::new(vec![1.0 / len as f64; len])
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// `Σ h²`: output variance per unit input variance for white noise.
    pub fn noise_gain(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Filter output at samples `phase + k·factor`, `k = 0, 1, …`, skipping
    /// outputs whose impulse response would reach before the first sample.
    pub fn filter_decimate(&self, input: &[f64], factor: usize, phase: usize) -> Vec<f64> {
        let factor = factor.max(1);
        let first = phase.max(self.taps.len() - 1);
        let first = first + (factor - (first - phase) % factor) % factor;
        (first..input.len())
            .step_by(factor)
            .map(|n| self.taps.iter().enumerate().map(|(j, h)| h * input[n - j]).sum())
            .collect()
    }
}

/// Multiplies `signal` by the local oscillator `cos(2π f t + phase)`, with
/// `t = k / sample_rate`.
pub fn mix_down(signal: &[f64], sample_rate: f64, frequency: f64, phase: f64) -> Vec<f64> {
    let step = std::f64::consts::TAU * frequency / sample_rate;
    signal
        .iter()
        .enumerate()
        .map(|(k, v)| v * (step * k as f64 + phase).cos())
        .collect()
}
