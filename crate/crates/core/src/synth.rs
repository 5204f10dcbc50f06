//! Synthetic homodyne data: phase-scanned quadrature traces and raw
//! photocurrents with the digital demodulation chain.
//!
//! Detection loss is a beam splitter of transmissivity `visibility` mixing in
//! vacuum before the detector. Electronic noise is additive and Gaussian, in
//! shot-noise units, independent between channels.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp::{mix_down, Fir};
use crate::error::{Error, Result};
use crate::gaussian::{check_physicality, GaussianTwoModeState, ModalBasis, DEFAULT_PHYSICALITY_TOL};
use crate::rng::rng_from_seed;
use crate::sideband::{canonical_angle, LoProjection};

/// How the LO phase evolves over an acquisition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RampRepr", into = "RampRepr")]
pub enum PhaseRamp {
    /// `θᵢ = 2π i / n`.
    #[default]
    Linear,
    /// One phase per sample.
    Explicit(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RampRepr {
    Name(String),
    Phases(Vec<f64>),
}

impl TryFrom<RampRepr> for PhaseRamp {
    type Error = String;

    fn try_from(repr: RampRepr) -> std::result::Result<Self, String> {
        match repr {
            RampRepr::Name(name) if name == "linear" => Ok(Self::Linear),
            RampRepr::Name(name) => Err(format!(
                "unknown phase ramp {name:?}, expected \"linear\" or a list of phases"
            )),
            RampRepr::Phases(p) => Ok(Self::Explicit(p)),
        }
    }
}

impl From<PhaseRamp> for RampRepr {
    fn from(ramp: PhaseRamp) -> Self {
        match ramp {
            PhaseRamp::Linear => Self::Name("linear".into()),
            PhaseRamp::Explicit(p) => Self::Phases(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub n_samples: usize,
    pub theta_ramp: PhaseRamp,
    pub visibility: f64,
    pub electronic_noise_var: f64,
    pub rng_seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            theta_ramp: PhaseRamp::Linear,
            visibility: 0.95,
            electronic_noise_var: 0.0,
            rng_seed: 0,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "visibility must lie in (0, 1], got {}",
                self.visibility
            )));
        }
        if !(self.electronic_noise_var.is_finite() && self.electronic_noise_var >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "electronic_noise_var must be >= 0, got {}",
                self.electronic_noise_var
            )));
        }
        if let PhaseRamp::Explicit(phases) = &self.theta_ramp {
            if phases.len() != self.n_samples {
                return Err(Error::InvalidParameter(format!(
                    "explicit phase list has {} entries but n_samples is {}",
                    phases.len(),
                    self.n_samples
                )));
            }
            if phases.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidParameter("explicit phases must be finite".into()));
            }
        }
        Ok(())
    }

    /// LO phases of every sample, in `[0, 2π)`.
    pub fn thetas(&self) -> Vec<f64> {
        match &self.theta_ramp {
            PhaseRamp::Linear => {
                let n = self.n_samples as f64;
                (0..self.n_samples).map(|i| TAU * i as f64 / n).collect()
            }
            PhaseRamp::Explicit(phases) => phases.iter().map(|&p| canonical_angle(p)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub theta: f64,
    pub x: f64,
}

/// Acquisition metadata carried alongside a trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMeta {
    pub scenario: String,
    pub seed: u64,
    pub visibility: f64,
    pub electronic_noise_var: f64,
}

/// One mixer-phase record of `(θ, x)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneTrace {
    psi: f64,
    samples: Vec<Sample>,
    meta: TraceMeta,
}

impl HomodyneTrace {
    pub fn new(psi: f64, samples: Vec<Sample>, meta: TraceMeta) -> Result<Self> {
        if !psi.is_finite() {
            return Err(Error::InvalidParameter("mixer phase must be finite".into()));
        }
        if let Some(bad) = samples
            .iter()
            .find(|s| !(s.theta >= 0.0 && s.theta < TAU && s.x.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "trace sample out of range: theta {} x {}",
                bad.theta, bad.x
            )));
        }
        Ok(Self {
            psi: canonical_angle(psi),
            samples,
            meta,
        })
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn with_meta(mut self, meta: TraceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn with_scenario(mut self, name: impl Into<String>) -> Self {
        self.meta.scenario = name.into();
        self
    }

    pub fn same_phases(&self, other: &Self) -> bool {
        self.samples.len() == other.samples.len()
            && self.samples.iter().zip(&other.samples).all(|(a, b)| a.theta == b.theta)
    }
}

fn detected_state(state: &GaussianTwoModeState, visibility: f64) -> Result<GaussianTwoModeState> {
    if state.basis() != ModalBasis::SymAntisym {
        return Err(Error::WrongBasis {
            expected: ModalBasis::SymAntisym,
        });
    }
    let check = check_physicality(state.cm(), DEFAULT_PHYSICALITY_TOL)?;
    if !check.passes {
        return Err(Error::Unphysical { margin: check.margin });
    }
    state.with_loss(visibility)
}

fn meta_for(config: &TraceConfig) -> TraceMeta {
    TraceMeta {
        scenario: String::new(),
        seed: config.rng_seed,
        visibility: config.visibility,
        electronic_noise_var: config.electronic_noise_var,
    }
}

/// Draws one quadrature sample per LO phase of the ramp, at mixer phase `psi`.
pub fn synthesize_trace(state: &GaussianTwoModeState, psi: f64, config: &TraceConfig) -> Result<HomodyneTrace> {
    config.validate()?;
    let detected = detected_state(state, config.visibility)?;
    let mut rng = rng_from_seed(config.rng_seed);
    let samples = config
        .thetas()
        .into_iter()
        .map(|theta| {
            let proj = LoProjection::new_unchecked(&detected, theta);
            let sd = (proj.variance(psi) + config.electronic_noise_var).sqrt();
            let z: f64 = rng.sample(StandardNormal);
            Sample {
                theta,
                x: proj.mean(psi) + sd * z,
            }
        })
        .collect();
    HomodyneTrace::new(psi, samples, meta_for(config))
}

/// Two simultaneous traces at mixer phases `psi1` and `psi1 + π/2` demodulated
/// from the same photocurrent: they share the LO ramp and the optical sample,
/// so their cross-covariance under the state is preserved.
pub fn synthesize_dual(
    state: &GaussianTwoModeState,
    psi1: f64,
    config: &TraceConfig,
) -> Result<(HomodyneTrace, HomodyneTrace)> {
    config.validate()?;
    let detected = detected_state(state, config.visibility)?;
    let psi2 = psi1 + FRAC_PI_2;
    let noise = config.electronic_noise_var;
    let mut rng = rng_from_seed(config.rng_seed);
    let thetas = config.thetas();
    let mut first = Vec::with_capacity(thetas.len());
    let mut second = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let proj = LoProjection::new_unchecked(&detected, theta);
        let v1 = proj.variance(psi1) + noise;
        let v2 = proj.variance(psi2) + noise;
        let c12 = proj.covariance(psi1, psi2);
        let l11 = v1.sqrt();
        let l21 = c12 / l11;
        let l22 = (v2 - l21 * l21).max(0.0).sqrt();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        first.push(Sample {
            theta,
            x: proj.mean(psi1) + l11 * z1,
        });
        second.push(Sample {
            theta,
            x: proj.mean(psi2) + l21 * z1 + l22 * z2,
        });
    }
    let meta = meta_for(config);
    Ok((
        HomodyneTrace::new(psi1, first, meta.clone())?,
        HomodyneTrace::new(psi2, second, meta)?,
    ))
}

/// Electronics of the raw-photocurrent path. Frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub sample_rate: f64,
    pub duration: f64,
    /// Demodulation frequency `Ω / 2π`.
    pub omega: f64,
    pub lowpass_cutoff: f64,
    /// Only the DC component is removed; see [`demodulate`].
    pub highpass_cutoff: f64,
    pub white_noise_var_per_sample: f64,
    pub rng_seed: u64,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            sample_rate: 24e6,
            duration: 20e-3,
            omega: 3e6,
            lowpass_cutoff: 3e5,
            highpass_cutoff: 5e5,
            white_noise_var_per_sample: 0.0,
            rng_seed: 0,
        }
    }
}

impl RawConfig {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.sample_rate,
            self.duration,
            self.omega,
            self.lowpass_cutoff,
            self.highpass_cutoff,
            self.white_noise_var_per_sample,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("raw config values must be finite".into()));
        }
        if !(self.omega > 0.0 && self.sample_rate > 4.0 * self.omega) {
            return Err(Error::InvalidParameter(format!(
                "sample_rate {} must exceed 4 x omega {}",
                self.sample_rate, self.omega
            )));
        }
        if !(self.lowpass_cutoff > 0.0 && self.lowpass_cutoff < self.omega) {
            return Err(Error::InvalidParameter(format!(
                "lowpass_cutoff {} must lie in (0, omega)",
                self.lowpass_cutoff
            )));
        }
        if self.white_noise_var_per_sample < 0.0 {
            return Err(Error::InvalidParameter(
                "white_noise_var_per_sample must be >= 0".into(),
            ));
        }
        if self.n_windows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "duration {} s is shorter than one low-pass window",
                self.duration
            )));
        }
        Ok(())
    }

    /// Raw samples per coherence window, `sample_rate / lowpass_cutoff` rounded.
    pub fn window_len(&self) -> usize {
        (self.sample_rate / self.lowpass_cutoff).round().max(1.0) as usize
    }

    pub fn n_windows(&self) -> usize {
        ((self.duration * self.sample_rate).floor() as usize) / self.window_len()
    }

    /// LO phase swept linearly over `[0, 2π)` across the acquisition.
    pub fn linear_ramp(&self) -> impl Fn(f64) -> f64 {
        let duration = self.duration;
        move |t| canonical_angle(TAU * t / duration)
    }
}

/// Sampled photocurrent `I(t)`; sample `k` is at `t = k / sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Photocurrent {
    pub sample_rate: f64,
    /// Samples per coherence window.
    pub window_len: usize,
    pub values: Vec<f64>,
}

impl Photocurrent {
    pub fn window_start(&self, window: usize) -> f64 {
        (window * self.window_len) as f64 / self.sample_rate
    }
}

/// Noise-free photocurrent `I(t) = 2 X_s cos Ωt - 2 X_a sin Ωt` holding one
/// `(X_s, X_a)` pair per window of `raw.window_len()` samples.
pub fn photocurrent_from_quadratures(quadratures: &[(f64, f64)], raw: &RawConfig) -> Photocurrent {
    let window_len = raw.window_len();
    let step = TAU * raw.omega / raw.sample_rate;
    let mut values = Vec::with_capacity(quadratures.len() * window_len);
    for (w, &(xs, xa)) in quadratures.iter().enumerate() {
        for k in w * window_len..(w + 1) * window_len {
            let (s, c) = (step * k as f64).sin_cos();
            values.push(2.0 * xs * c - 2.0 * xa * s);
        }
    }
    Photocurrent {
        sample_rate: raw.sample_rate,
        window_len,
        values,
    }
}

/// Raw photocurrent of `state`: `(X_s, X_a)` is redrawn from its joint
/// Gaussian once per window of length `1 / lowpass_cutoff`, at the LO phase
/// `theta_of_t(window start)`, and white noise is added per sample.
pub fn synthesize_raw_photocurrent(
    state: &GaussianTwoModeState,
    theta_of_t: impl Fn(f64) -> f64,
    raw: &RawConfig,
) -> Result<Photocurrent> {
    raw.validate()?;
    let state = detected_state(state, 1.0)?;
    let window_len = raw.window_len();
    let mut rng = rng_from_seed(raw.rng_seed);
    let quadratures: Vec<(f64, f64)> = (0..raw.n_windows())
        .map(|w| {
            let t0 = (w * window_len) as f64 / raw.sample_rate;
            let proj = LoProjection::new_unchecked(&state, theta_of_t(t0));
            let l11 = proj.variance(0.0).sqrt();
            let l21 = proj.covariance(0.0, FRAC_PI_2) / l11;
            let l22 = (proj.variance(FRAC_PI_2) - l21 * l21).max(0.0).sqrt();
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            (proj.mean(0.0) + l11 * z1, proj.mean(FRAC_PI_2) + l21 * z1 + l22 * z2)
        })
        .collect();
    let mut current = photocurrent_from_quadratures(&quadratures, raw);
    if raw.white_noise_var_per_sample > 0.0 {
        let sd = raw.white_noise_var_per_sample.sqrt();
        for v in &mut current.values {
            *v += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(current)
}

/// Mixer plus low-pass: removes the DC component, multiplies by
/// `cos(Ωt + Ψ)` and averages over each coherence window, giving
/// `X_s cos Ψ + X_a sin Ψ` per window.
///
/// The low-pass is a moving average of one window (`sample_rate /
/// lowpass_cutoff` taps), i.e. its first spectral null sits at the cutoff.
/// It is evaluated at the last sample of each window.
pub fn demodulate(
    current: &Photocurrent,
    omega: f64,
    psi: f64,
    lowpass_cutoff: f64,
    theta_of_t: impl Fn(f64) -> f64,
) -> Result<HomodyneTrace> {
    if !(lowpass_cutoff > 0.0 && lowpass_cutoff < omega) {
        return Err(Error::InvalidParameter(format!(
            "low-pass cutoff {lowpass_cutoff} Hz must lie below the demodulation frequency {omega} Hz"
        )));
    }
    let window_len = (current.sample_rate / lowpass_cutoff).round().max(1.0) as usize;
    if window_len != current.window_len {
        return Err(Error::InvalidParameter(format!(
            "low-pass window of {window_len} samples does not match the photocurrent windows of {}",
            current.window_len
        )));
    }
    let mean = current.values.iter().sum::<f64>() / current.values.len().max(1) as f64;
    let centred: Vec<f64> = current.values.iter().map(|v| v - mean).collect();
    let mixed = mix_down(&centred, current.sample_rate, omega, psi);
    let lowpass = Fir::moving_average(window_len)?;
    let samples = lowpass
        .filter_decimate(&mixed, window_len, window_len - 1)
        .into_iter()
        .enumerate()
        .map(|(w, x)| Sample {
            theta: canonical_angle(theta_of_t(current.window_start(w))),
            x,
        })
        .collect();
    HomodyneTrace::new(psi, samples, TraceMeta::default())
}
