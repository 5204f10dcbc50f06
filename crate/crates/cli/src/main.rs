//! `sideband-tomo`: simulate, reconstruct and analyse sideband homodyne
//! tomography experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sideband_tomo::commands::{cmd_analyze, cmd_pipeline, cmd_reconstruct, cmd_simulate};
use sideband_tomo::recon::{Estimator, ReconstructOptions};
use sideband_tomo::report::Format;
use sideband_tomo::scenario::{Scenario, PRESETS};

/// Exit status when a reconstruction succeeds but violates `σ + iΩ ≥ 0`.
const EXIT_UNPHYSICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sideband-tomo",
    version,
    about = "Spectral homodyne tomography of sideband mode pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the four mixer-phase traces, the lock readout and the ground truth.
    Simulate {
        /// Scenario file, or a preset name.
        #[arg(long, help = preset_help())]
        scenario: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides `trace.rng_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },

    /// Reconstruct the covariance matrix from a directory of traces.
    Reconstruct {
        /// Directory written by `simulate`.
        dir: PathBuf,
        #[arg(long, default_value = "harmonic")]
        estimator: Estimator,
        /// Bootstrap seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bootstrap resamples; 0 selects analytic errors.
        #[arg(long, default_value_t = 500)]
        resamples: usize,
        #[arg(long, default_value = "text")]
        format: Format,
    },

    /// Print every metric of a stored state (`basis`, `r`, `sigma`).
    Analyze {
        path: PathBuf,
        #[arg(long, default_value = "text")]
        format: Format,
    },

    /// Repeated simulate + reconstruct runs with aggregate statistics.
    Pipeline {
        /// Scenario file, or a preset name.
        #[arg(long, help = preset_help())]
        scenario: String,
        /// Overrides `pipeline.n_repetitions`.
        #[arg(long)]
        reps: Option<usize>,
        /// Overrides `pipeline.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `pipeline.estimator`.
        #[arg(long)]
        estimator: Option<Estimator>,
        /// Writes per-run reports and the aggregate here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "text")]
        format: Format,
    },
}

fn preset_help() -> String {
    format!("Scenario file, or one of: {}", PRESETS.join(", "))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { scenario, out, seed } => {
            let scenario = Scenario::load(&scenario)?;
            let seed = seed.unwrap_or(scenario.trace.rng_seed);
            let sim =
                cmd_simulate(&scenario, &out, seed).with_context(|| format!("simulating into {}", out.display()))?;
            println!(
                "wrote 4 traces of {} samples, lock readout and ground truth to {}",
                sim.traces.trace_s().len(),
                out.display()
            );
        }
        Command::Reconstruct {
            dir,
            estimator,
            seed,
            resamples,
            format,
        } => {
            let options = ReconstructOptions {
                estimator,
                bootstrap_resamples: resamples,
                seed,
            };
            let report =
                cmd_reconstruct(&dir, &options).with_context(|| format!("reconstructing {}", dir.display()))?;
            print!("{}", report.render(format)?);
            if !report.physical {
                eprintln!("warning: reconstructed covariance matrix violates the uncertainty principle");
                return Ok(ExitCode::from(EXIT_UNPHYSICAL));
            }
        }
        Command::Analyze { path, format } => {
            let analysis = cmd_analyze(&path)?;
            print!("{}", analysis.render(format)?);
        }
        Command::Pipeline {
            scenario,
            reps,
            seed,
            estimator,
            out,
            format,
        } => {
            let mut scenario = Scenario::load(&scenario)?;
            if let Some(reps) = reps {
                scenario.pipeline.n_repetitions = reps;
            }
            if let Some(seed) = seed {
                scenario.pipeline.master_seed = seed;
            }
            if let Some(estimator) = estimator {
                scenario.pipeline.estimator = estimator;
            }
            let report = cmd_pipeline(&scenario, out.as_deref())?;
            print!("{}", report.render(format)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
