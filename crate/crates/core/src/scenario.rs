//! Scenario configuration, bundled presets and ground truth.

use std::path::Path;

use nalgebra::{Complex, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{change_basis, tmst_state, GaussianTwoModeState, ModalBasis, TmstParams};
use crate::io::{from_toml, read_toml, to_flat_toml};
use crate::recon::{Estimator, Metrics, ReconstructOptions, MIN_BOOTSTRAP_RESAMPLES};
use crate::sideband::{cavity_transmission, CavityModel, PdhReadout};
use crate::synth::{RawConfig, TraceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmstSection {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub n_sq: f64,
    pub n_th: f64,
    pub r_th: f64,
}

impl TmstSection {
    pub fn params(&self) -> Result<TmstParams> {
        TmstParams::new(
            Complex::new(self.alpha_re, self.alpha_im),
            self.n_sq,
            self.n_th,
            self.r_th,
        )
    }
}

impl From<&TmstParams> for TmstSection {
    fn from(p: &TmstParams) -> Self {
        Self {
            alpha_re: p.alpha.re,
            alpha_im: p.alpha.im,
            n_sq: p.n_sq,
            n_th: p.n_th,
            r_th: p.r_th,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub n_repetitions: usize,
    /// `0` selects analytic errors.
    pub bootstrap_resamples: usize,
    pub master_seed: u64,
    pub estimator: Estimator,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_repetitions: 30,
            bootstrap_resamples: 500,
            master_seed: 0,
            estimator: Estimator::Harmonic,
        }
    }
}

impl PipelineConfig {
    pub fn reconstruct_options(&self, seed: u64) -> ReconstructOptions {
        ReconstructOptions {
            estimator: self.estimator,
            bootstrap_resamples: self.bootstrap_resamples,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub tmst: TmstSection,
    #[serde(default = "CavityModel::reference")]
    pub cavity: CavityModel,
    #[serde(default)]
    pub trace: TraceConfig,
    /// When present, traces come from the raw photocurrent and the digital
    /// demodulator instead of direct quadrature sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawConfig>,
    /// Replaces the cavity-derived sideband transmissions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdh: Option<PdhReadout>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

/// Names accepted by [`Scenario::preset`].
pub const PRESETS: [&str; 6] = [
    "vacuum",
    "coherent",
    "squeezed",
    "squeezed-coherent",
    "thermal-unbalanced",
    "detuned-thermal",
];

impl Scenario {
    fn base(name: &str, alpha: f64, n_sq: f64, n_th: f64, r_th: f64) -> Self {
        Self {
            name: name.into(),
            tmst: TmstSection {
                alpha_re: alpha,
                alpha_im: 0.0,
                n_sq,
                n_th,
                r_th,
            },
            cavity: CavityModel::reference(),
            trace: TraceConfig {
                // parameters describe the detected state
                visibility: 1.0,
                ..TraceConfig::default()
            },
            raw: None,
            pdh: None,
            pipeline: PipelineConfig {
                bootstrap_resamples: 200,
                ..PipelineConfig::default()
            },
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let scenario = match name {
            "vacuum" => Self::base(name, 0.0, 0.0, 0.0, 0.5),
            "coherent" => Self::base(name, 1.0, 0.0, 0.0, 0.5),
            "squeezed" => Self::base(name, 0.0, 0.320, 0.471, 0.5),
            // A - C = 0.55, A + C = 4.174 with α = 1
            "squeezed-coherent" => Self::base(name, 1.0, 0.2794573030823969, 0.5151567575666884, 0.5),
            // all thermal photons in the upper sideband, seen by the lock as
            // full transmission of that sideband
            "thermal-unbalanced" => Self {
                pdh: Some(PdhReadout {
                    tau_plus: 1.0,
                    tau_minus: 0.0,
                }),
                ..Self::base(name, 0.0, 0.0, 1.0, 1.0)
            },
            // thermal light filtered by a cavity detuned by 5 MHz
            "detuned-thermal" => {
                let mut s = Self::base(name, 0.0, 0.0, 1.0, 0.5);
                s.cavity.detuning = 5e6;
                s.tmst.r_th = cavity_transmission(&s.cavity)?.readout.tau_plus;
                s
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}, expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// A preset name, or a path to a scenario file.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.is_file() {
            Self::from_file(path)
        } else if PRESETS.contains(&spec) {
            Self::preset(spec)
        } else {
            Err(Error::Config(format!(
                "{spec:?} is neither a scenario file nor a preset ({})",
                PRESETS.join(", ")
            )))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let scenario: Self = read_toml(path)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let scenario: Self = from_toml(text, path)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> Result<String> {
        to_flat_toml(self)
    }

    pub fn validate(&self) -> Result<()> {
        fn ctx(section: &'static str) -> impl Fn(Error) -> Error {
            move |e| Error::Config(format!("{section}: {e}"))
        }
        if self.name.trim().is_empty() || self.name.contains(['\n', '\r']) {
            return Err(Error::Config("name must be a non-empty single line".into()));
        }
        self.tmst.params().map_err(ctx("tmst"))?;
        self.cavity.validate().map_err(ctx("cavity"))?;
        self.trace.validate().map_err(ctx("trace"))?;
        if let Some(raw) = &self.raw {
            raw.validate().map_err(ctx("raw"))?;
        }
        if let Some(pdh) = &self.pdh {
            pdh.validate().map_err(ctx("pdh"))?;
        }
        let p = &self.pipeline;
        // TOML integers are signed 64-bit
        for (key, seed) in [
            ("trace.rng_seed", self.trace.rng_seed),
            ("pipeline.master_seed", p.master_seed),
        ] {
            if seed > i64::MAX as u64 {
                return Err(Error::Config(format!("{key} must not exceed {}", i64::MAX)));
            }
        }
        if p.n_repetitions == 0 {
            return Err(Error::Config("pipeline: n_repetitions must be at least 1".into()));
        }
        if p.bootstrap_resamples != 0 && p.bootstrap_resamples < MIN_BOOTSTRAP_RESAMPLES {
            return Err(Error::Config(format!(
                "pipeline: bootstrap_resamples must be 0 or at least {MIN_BOOTSTRAP_RESAMPLES}"
            )));
        }
        Ok(())
    }

    /// The generated state in the symmetric/antisymmetric basis, before loss.
    pub fn source_state(&self) -> Result<GaussianTwoModeState> {
        Ok(change_basis(&tmst_state(&self.tmst.params()?)?))
    }

    pub fn pdh_readout(&self) -> Result<PdhReadout> {
        match self.pdh {
            Some(pdh) => Ok(pdh),
            None => Ok(cavity_transmission(&self.cavity)?.readout),
        }
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let detected = self.source_state()?.with_loss(self.trace.visibility)?;
        let sideband = change_basis(&detected);
        let delta_n = detected.cm()[(0, 3)];
        Ok(GroundTruth {
            scenario: self.name.clone(),
            visibility: self.trace.visibility,
            tmst: self.tmst,
            basis: ModalBasis::SidebandPm,
            r: vector_to_array(sideband.first_moments()),
            sigma: matrix_to_array(sideband.cm()),
            metrics: Metrics::compute(detected.cm(), sideband.cm(), delta_n),
        })
    }
}

pub fn vector_to_array(v: &Vector4<f64>) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

pub fn matrix_to_array(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

pub fn array_to_matrix(a: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| a[i][j])
}

/// A Gaussian state on disk: basis, first moments and covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub basis: ModalBasis,
    pub r: [f64; 4],
    pub sigma: [[f64; 4]; 4],
}

impl StateRecord {
    pub fn state(&self) -> Result<GaussianTwoModeState> {
        GaussianTwoModeState::new(Vector4::from(self.r), array_to_matrix(&self.sigma), self.basis)
    }
}

/// Detected state of a scenario in the sideband basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: String,
    pub visibility: f64,
    pub tmst: TmstSection,
    pub basis: ModalBasis,
    pub r: [f64; 4],
    pub sigma: [[f64; 4]; 4],
    pub metrics: Metrics,
}

impl GroundTruth {
    pub fn record(&self) -> StateRecord {
        StateRecord {
            basis: self.basis,
            r: self.r,
            sigma: self.sigma,
        }
    }
}
