//! Reconstruction and pipeline reports, as aligned text tables or flat TOML.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{from_toml, to_flat_toml};
use crate::recon::{ErrorMethod, Estimator, Metrics, ReconstructedState, METRIC_NAMES};
use crate::scenario::{matrix_to_array, vector_to_array, GroundTruth};
use crate::sideband::PdhReadout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Machine,
}

impl std::str::FromStr for Format {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "machine" => Ok(Self::Machine),
            other => Err(crate::Error::Config(format!(
                "unknown format {other:?}, expected \"text\" or \"machine\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEntry {
    pub value: [f64; 4],
    pub error: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub value: [[f64; 4]; 4],
    pub error: [[f64; 4]; 4],
}

impl VectorEntry {
    fn new(value: &Vector4<f64>, error: &Vector4<f64>) -> Self {
        Self {
            value: vector_to_array(value),
            error: vector_to_array(error),
        }
    }
}

impl MatrixEntry {
    fn new(value: &Matrix4<f64>, error: &Matrix4<f64>) -> Self {
        Self {
            value: matrix_to_array(value),
            error: matrix_to_array(error),
        }
    }
}

/// Comparison of a reconstruction with the state it was simulated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthComparison {
    pub r_omega: [f64; 4],
    pub sigma_omega: [[f64; 4]; 4],
    pub metrics: Metrics,
    /// Largest `|reconstructed - truth| / error` over the entries of `σ_Ω`.
    pub max_sigma_deviation: f64,
}

impl TruthComparison {
    fn new(truth: &GroundTruth, sigma: &MatrixEntry) -> Self {
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let diff = (sigma.value[i][j] - truth.sigma[i][j]).abs();
                let err = sigma.error[i][j];
                if err > 0.0 {
                    worst = worst.max(diff / err);
                } else if diff > 1e-12 {
                    worst = f64::INFINITY;
                }
            }
        }
        Self {
            r_omega: truth.r,
            sigma_omega: truth.sigma,
            metrics: truth.metrics,
            max_sigma_deviation: worst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub scenario: String,
    pub estimator: Estimator,
    pub n_samples: usize,
    /// `0` when errors come from analytic propagation.
    pub bootstrap_resamples: usize,
    pub pdh: PdhReadout,
    pub entangled: bool,
    pub physical: bool,
    pub r_prime: VectorEntry,
    pub sigma_prime: MatrixEntry,
    pub r_omega: VectorEntry,
    pub sigma_omega: MatrixEntry,
    pub metrics: Metrics,
    pub metric_errors: Metrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthComparison>,
}

impl ReconstructionReport {
    pub fn new(scenario: &str, n_samples: usize, rec: &ReconstructedState, truth: Option<&GroundTruth>) -> Self {
        let u = &rec.uncertainties;
        let sigma_omega = MatrixEntry::new(&rec.sigma_omega, &u.sigma_omega);
        Self {
            scenario: scenario.to_string(),
            estimator: rec.estimator,
            n_samples,
            bootstrap_resamples: match u.method {
                ErrorMethod::Analytic => 0,
                ErrorMethod::Bootstrap { resamples } => resamples,
            },
            pdh: rec.pdh,
            entangled: rec.metrics.entangled(),
            physical: rec.is_physical(),
            r_prime: VectorEntry::new(&rec.r_prime, &u.r_prime),
            sigma_prime: MatrixEntry::new(&rec.sigma_prime, &u.sigma_prime),
            r_omega: VectorEntry::new(&rec.r_omega, &u.r_omega),
            truth: truth.map(|t| TruthComparison::new(t, &sigma_omega)),
            sigma_omega,
            metrics: rec.metrics,
            metric_errors: u.metrics,
        }
    }

    pub fn to_machine(&self) -> Result<String> {
        to_flat_toml(self)
    }

    pub fn from_machine(text: &str, path: &Path) -> Result<Self> {
        from_toml(text, path)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Text => Ok(self.to_text()),
            Format::Machine => self.to_machine(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let errors = if self.bootstrap_resamples == 0 {
            "analytic".to_string()
        } else {
            format!("bootstrap, {} resamples", self.bootstrap_resamples)
        };
        let _ = writeln!(out, "scenario   {}", self.scenario);
        let _ = writeln!(
            out,
            "estimator  {} ({} samples per trace, errors: {errors})",
            self.estimator, self.n_samples
        );
        let _ = writeln!(
            out,
            "lock       tau+ = {:.4}, tau- = {:.4}",
            self.pdh.tau_plus, self.pdh.tau_minus
        );
        out.push('\n');
        write_vector(&mut out, "R_Omega (upper, lower sideband)", &self.r_omega);
        write_matrix(&mut out, "sigma_Omega", &self.sigma_omega);
        write_vector(&mut out, "R' (symmetric, antisymmetric)", &self.r_prime);
        write_matrix(&mut out, "sigma'", &self.sigma_prime);
        let _ = writeln!(out, "metrics");
        let values = self.metrics.to_array();
        let errors = self.metric_errors.to_array();
        let truths = self.truth.as_ref().map(|t| t.metrics.to_array());
        for (k, name) in METRIC_NAMES.iter().enumerate() {
            let _ = write!(out, "  {name:<22}{}", pm(values[k], errors[k]));
            if let Some(truths) = &truths {
                let _ = write!(out, "   truth {:>9.4}", truths[k]);
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "\n{}, {}",
            if self.entangled {
                "entangled (lambda < 1)"
            } else {
                "not certified entangled"
            },
            if self.physical {
                "physical"
            } else {
                "UNPHYSICAL (negative margin)"
            },
        );
        if let Some(t) = &self.truth {
            let _ = writeln!(
                out,
                "largest sigma_Omega deviation from truth: {:.2} standard errors",
                t.max_sigma_deviation
            );
        }
        out
    }
}

fn pm(value: f64, error: f64) -> String {
    if error.is_nan() {
        format!("{value:>9.4}         ")
    } else {
        format!("{value:>9.4} ± {error:<7.4}")
    }
}

fn write_vector(out: &mut String, title: &str, v: &VectorEntry) {
    let _ = writeln!(out, "{title}");
    out.push(' ');
    for k in 0..4 {
        let _ = write!(out, " {}", pm(v.value[k], v.error[k]));
    }
    out.push_str("\n\n");
}

fn write_matrix(out: &mut String, title: &str, m: &MatrixEntry) {
    let _ = writeln!(out, "{title}");
    for i in 0..4 {
        out.push(' ');
        for j in 0..4 {
            let _ = write!(out, " {}", pm(m.value[i][j], m.error[i][j]));
        }
        out.push('\n');
    }
    out.push('\n');
}

/// Mean, spread across repetitions, and ground truth of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over repetitions (`NaN` for one run).
    pub spread: f64,
    pub truth: f64,
}

impl Summary {
    pub fn from_values(values: &[f64], truth: f64) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / n;
        let spread = if finite.len() > 1 {
            (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, spread, truth }
    }
}

/// Per-repetition outcome kept in the aggregate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Repetition index; the run drew from `derive_seed(master_seed, index)`.
    pub index: usize,
    pub physical: bool,
    pub physicality_margin: f64,
    /// Largest standard error among the entries of `σ′`.
    pub max_sigma_prime_error: f64,
    pub ppt_min: f64,
    pub ppt_min_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenario: String,
    pub estimator: Estimator,
    pub n_repetitions: usize,
    pub n_samples: usize,
    pub bootstrap_resamples: usize,
    pub master_seed: u64,
    pub physical_runs: usize,
    pub metrics: Metrics<Summary>,
    pub r_omega: [Summary; 4],
    pub sigma_omega: [[Summary; 4]; 4],
    pub runs: Vec<RunRecord>,
}

impl AggregateReport {
    pub fn to_machine(&self) -> Result<String> {
        to_flat_toml(self)
    }

    pub fn from_machine(text: &str, path: &Path) -> Result<Self> {
        from_toml(text, path)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Text => Ok(self.to_text()),
            Format::Machine => self.to_machine(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario     {}", self.scenario);
        let _ = writeln!(
            out,
            "repetitions  {} x {} samples per trace, {} estimator, master seed {}",
            self.n_repetitions, self.n_samples, self.estimator, self.master_seed
        );
        let _ = writeln!(
            out,
            "physical     {} of {} runs\n",
            self.physical_runs, self.n_repetitions
        );
        let _ = writeln!(out, "{:<22}{:>10}{:>10}{:>10}", "metric", "mean", "spread", "truth");
        for (name, s) in METRIC_NAMES.iter().zip(self.metrics.to_array()) {
            let _ = writeln!(out, "{name:<22}{:>10.4}{:>10.4}{:>10.4}", s.mean, s.spread, s.truth);
        }
        let _ = writeln!(out, "\nR_Omega mean ± spread (truth)");
        for s in &self.r_omega {
            let _ = write!(out, "  {:>8.4} ± {:<6.4} ({:>7.4})", s.mean, s.spread, s.truth);
        }
        let _ = writeln!(out, "\n\nsigma_Omega mean ± spread (truth)");
        for row in &self.sigma_omega {
            for s in row {
                let _ = write!(out, "  {:>8.4} ± {:<6.4} ({:>7.4})", s.mean, s.spread, s.truth);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::{reconstruct, ReconstructOptions, TraceSet};
    use crate::scenario::Scenario;
    use crate::synth::{synthesize_dual, TraceConfig};

    fn report() -> ReconstructionReport {
        let scenario = Scenario::preset("squeezed").unwrap();
        let state = scenario.source_state().unwrap();
        let config = |seed| TraceConfig {
            n_samples: 2000,
            visibility: 1.0,
            rng_seed: seed,
            ..TraceConfig::default()
        };
        let (s, a) = synthesize_dual(&state, 0.0, &config(1)).unwrap();
        let (m, p) = synthesize_dual(&state, -std::f64::consts::FRAC_PI_4, &config(2)).unwrap();
        let set = TraceSet::new(s, a, p, m).unwrap();
        let options = ReconstructOptions {
            bootstrap_resamples: 0,
            ..ReconstructOptions::default()
        };
        let rec = reconstruct(&set, &PdhReadout::balanced(), &options).unwrap();
        ReconstructionReport::new("squeezed", 2000, &rec, Some(&scenario.ground_truth().unwrap()))
    }

    #[test]
    fn machine_report_round_trips() {
        let r = report();
        let text = r.to_machine().unwrap();
        let back = ReconstructionReport::from_machine(&text, Path::new("r.toml")).unwrap();
        assert_eq!(back.to_machine().unwrap(), text);
        assert_eq!(back.sigma_omega, r.sigma_omega);
        assert!(text.contains("metric_errors.ppt_min = nan"));
    }

    #[test]
    fn text_report_mirrors_numbers() {
        let r = report();
        let text = r.to_text();
        assert!(text.contains("sigma_Omega"));
        assert!(text.contains(&format!("{:.4}", r.sigma_omega.value[0][0])));
        assert!(text.contains("entangled (lambda < 1)"));
        assert!(text.contains("truth"));
    }

    #[test]
    fn summaries() {
        let s = Summary::from_values(&[1.0, 2.0, f64::NAN, 3.0], 2.0);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.spread, 1.0);
        assert!(Summary::from_values(&[1.0], 0.0).spread.is_nan());
    }

    #[test]
    fn formats_parse() {
        assert_eq!("machine".parse::<Format>().unwrap(), Format::Machine);
        assert!("json".parse::<Format>().is_err());
    }
}
