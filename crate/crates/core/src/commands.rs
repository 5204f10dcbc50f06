//! End-to-end drivers behind the command-line subcommands.
//!
//! Seeds: acquisition `j` of a simulation with seed `s` draws from
//! `derive_seed(s, j)`; repetition `k` of a pipeline uses
//! `s = derive_seed(master_seed, k)` and bootstraps with `derive_seed(s, 2)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianTwoModeState, ModalBasis};
use crate::io::{
    from_toml, read_toml, read_trace_set, to_flat_toml, write_toml, write_trace_set, PDH_FILE, REPORT_FILE, TRUTH_FILE,
};
use crate::recon::{reconstruct, Metrics, ReconstructOptions, ReconstructedState, TraceSet, METRIC_NAMES};
use crate::report::{AggregateReport, Format, ReconstructionReport, RunRecord, Summary};
use crate::rng::derive_seed;
use crate::scenario::{matrix_to_array, vector_to_array, GroundTruth, Scenario, StateRecord};
use crate::sideband::PdhReadout;
use crate::synth::{demodulate, synthesize_dual, synthesize_raw_photocurrent, HomodyneTrace, TraceMeta};

/// Traces, lock readout and ground truth of one simulated acquisition.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub traces: TraceSet,
    pub pdh: PdhReadout,
    pub truth: GroundTruth,
}

fn acquire(
    scenario: &Scenario,
    state: &GaussianTwoModeState,
    psi1: f64,
    seed: u64,
) -> Result<(HomodyneTrace, HomodyneTrace)> {
    let meta = TraceMeta {
        scenario: scenario.name.clone(),
        seed,
        visibility: scenario.trace.visibility,
        electronic_noise_var: scenario.trace.electronic_noise_var,
    };
    let (first, second) = match &scenario.raw {
        None => {
            let mut config = scenario.trace.clone();
            config.rng_seed = seed;
            synthesize_dual(state, psi1, &config)?
        }
        Some(raw) => {
            let mut raw = raw.clone();
            raw.rng_seed = seed;
            let detected = state.with_loss(scenario.trace.visibility)?;
            let current = synthesize_raw_photocurrent(&detected, raw.linear_ramp(), &raw)?;
            (
                demodulate(&current, raw.omega, psi1, raw.lowpass_cutoff, raw.linear_ramp())?,
                demodulate(
                    &current,
                    raw.omega,
                    psi1 + FRAC_PI_2,
                    raw.lowpass_cutoff,
                    raw.linear_ramp(),
                )?,
            )
        }
    };
    Ok((first.with_meta(meta.clone()), second.with_meta(meta)))
}

/// Two dual-channel acquisitions, at `Ψ = 0` and at `Ψ = -π/4`.
pub fn simulate(scenario: &Scenario, seed: u64) -> Result<Simulation> {
    scenario.validate()?;
    let state = scenario.source_state()?;
    let (s, a) = acquire(scenario, &state, 0.0, derive_seed(seed, 0))?;
    let (minus, plus) = acquire(scenario, &state, -FRAC_PI_4, derive_seed(seed, 1))?;
    Ok(Simulation {
        traces: TraceSet::new(s, a, plus, minus)?,
        pdh: scenario.pdh_readout()?,
        truth: scenario.ground_truth()?,
    })
}

/// Writes the four traces, `pdh.toml` and the `truth.toml` sidecar.
pub fn cmd_simulate(scenario: &Scenario, out_dir: &Path, seed: u64) -> Result<Simulation> {
    let sim = simulate(scenario, seed)?;
    write_trace_set(out_dir, &sim.traces)?;
    write_toml(&out_dir.join(PDH_FILE), &sim.pdh)?;
    write_toml(&out_dir.join(TRUTH_FILE), &sim.truth)?;
    Ok(sim)
}

/// Reconstructs a simulation directory and writes `report.toml` into it.
/// The ground truth is attached when the sidecar is present.
pub fn cmd_reconstruct(dir: &Path, options: &ReconstructOptions) -> Result<ReconstructionReport> {
    let traces = read_trace_set(dir)?;
    let pdh_path = dir.join(PDH_FILE);
    if !pdh_path.is_file() {
        return Err(Error::Missing(format!("lock readout {}", pdh_path.display())));
    }
    let pdh: PdhReadout = read_toml(&pdh_path)?;
    pdh.validate()?;
    let truth_path = dir.join(TRUTH_FILE);
    let truth: Option<GroundTruth> = if truth_path.is_file() {
        Some(read_toml(&truth_path)?)
    } else {
        None
    };
    let rec = reconstruct(&traces, &pdh, options)?;
    let report = ReconstructionReport::new(traces.scenario(), traces.trace_s().len(), &rec, truth.as_ref());
    write_toml(&dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Every metric of a stored state, in both bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub input_basis: ModalBasis,
    pub physical: bool,
    pub entangled: bool,
    pub r_omega: [f64; 4],
    pub sigma_omega: [[f64; 4]; 4],
    pub r_prime: [f64; 4],
    pub sigma_prime: [[f64; 4]; 4],
    pub metrics: Metrics,
}

impl Analysis {
    pub fn new(state: &GaussianTwoModeState) -> Self {
        let prime = state.in_basis(ModalBasis::SymAntisym);
        let omega = state.in_basis(ModalBasis::SidebandPm);
        let metrics = Metrics::compute(prime.cm(), omega.cm(), prime.cm()[(0, 3)]);
        Self {
            input_basis: state.basis(),
            physical: metrics.physicality_margin >= -crate::gaussian::DEFAULT_PHYSICALITY_TOL,
            entangled: metrics.entangled(),
            r_omega: vector_to_array(omega.first_moments()),
            sigma_omega: matrix_to_array(omega.cm()),
            r_prime: vector_to_array(prime.first_moments()),
            sigma_prime: matrix_to_array(prime.cm()),
            metrics,
        }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Machine => to_flat_toml(self),
            Format::Text => {
                let mut out = String::new();
                let _ = writeln!(out, "input basis  {}", self.input_basis);
                for (name, value) in METRIC_NAMES.iter().zip(self.metrics.to_array()) {
                    let _ = writeln!(out, "  {name:<22}{value:>10.6}");
                }
                let _ = writeln!(
                    out,
                    "{}, {}",
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
                Ok(out)
            }
        }
    }
}

/// Analyses a state file holding `basis`, `r` and `sigma` (a `truth.toml`
/// sidecar qualifies).
pub fn cmd_analyze(path: &Path) -> Result<Analysis> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    let record: StateRecord = from_toml(&text, path)?;
    Ok(Analysis::new(&record.state()?))
}

/// One pipeline repetition.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub state: ReconstructedState,
}

/// Simulates and reconstructs `scenario.pipeline.n_repetitions` independent
/// acquisitions. Results are ordered by repetition index.
pub fn run_repetitions(scenario: &Scenario) -> Result<Vec<RunOutcome>> {
    scenario.validate()?;
    let p = &scenario.pipeline;
    (0..p.n_repetitions as u64)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(p.master_seed, k);
            let sim = simulate(scenario, seed)?;
            let state = reconstruct(&sim.traces, &sim.pdh, &p.reconstruct_options(derive_seed(seed, 2)))?;
            Ok(RunOutcome { seed, state })
        })
        .collect()
}

pub fn aggregate(scenario: &Scenario, n_samples: usize, runs: &[RunOutcome]) -> Result<AggregateReport> {
    let truth = scenario.ground_truth()?;
    let truth_metrics = truth.metrics.to_array();
    let metric_values: Vec<[f64; 10]> = runs.iter().map(|r| r.state.metrics.to_array()).collect();
    let metrics = Metrics::from_array(std::array::from_fn(|k| {
        let column: Vec<f64> = metric_values.iter().map(|m| m[k]).collect();
        Summary::from_values(&column, truth_metrics[k])
    }));
    let r_omega = std::array::from_fn(|i| {
        let column: Vec<f64> = runs.iter().map(|r| r.state.r_omega[i]).collect();
        Summary::from_values(&column, truth.r[i])
    });
    let sigma_omega = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let column: Vec<f64> = runs.iter().map(|r| r.state.sigma_omega[(i, j)]).collect();
            Summary::from_values(&column, truth.sigma[i][j])
        })
    });
    let records: Vec<RunRecord> = runs
        .iter()
        .enumerate()
        .map(|(index, r)| RunRecord {
            index,
            physical: r.state.is_physical(),
            physicality_margin: r.state.metrics.physicality_margin,
            max_sigma_prime_error: r.state.uncertainties.max_sigma_prime(),
            ppt_min: r.state.metrics.ppt_min,
            ppt_min_error: r.state.uncertainties.metrics.ppt_min,
        })
        .collect();
    Ok(AggregateReport {
        scenario: scenario.name.clone(),
        estimator: scenario.pipeline.estimator,
        n_repetitions: runs.len(),
        n_samples,
        bootstrap_resamples: scenario.pipeline.bootstrap_resamples,
        master_seed: scenario.pipeline.master_seed,
        physical_runs: records.iter().filter(|r| r.physical).count(),
        metrics,
        r_omega,
        sigma_omega,
        runs: records,
    })
}

/// Runs the Monte Carlo pipeline. With `out_dir`, each repetition's report
/// goes to `run-NNN/report.toml` and the aggregate to `aggregate.toml`.
pub fn cmd_pipeline(scenario: &Scenario, out_dir: Option<&Path>) -> Result<AggregateReport> {
    let runs = run_repetitions(scenario)?;
    let n_samples = samples_per_trace(scenario);
    let report = aggregate(scenario, n_samples, &runs)?;
    if let Some(dir) = out_dir {
        let truth = scenario.ground_truth()?;
        for (k, run) in runs.iter().enumerate() {
            let run_dir = dir.join(format!("run-{k:03}"));
            fs::create_dir_all(&run_dir)?;
            let single = ReconstructionReport::new(&scenario.name, n_samples, &run.state, Some(&truth));
            write_toml(&run_dir.join(REPORT_FILE), &single)?;
        }
        write_toml(&dir.join("aggregate.toml"), &report)?;
    }
    Ok(report)
}

fn samples_per_trace(scenario: &Scenario) -> usize {
    match &scenario.raw {
        Some(raw) => raw.n_windows(),
        None => scenario.trace.n_samples,
    }
}
