//! Nonparametric bootstrap over trace samples.
//!
//! Channels recorded together (the `Ψ = 0, π/2` pair and the `Ψ = ±π/4`
//! pair) share the optical sample, so their rows are resampled jointly.

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rayon::prelude::*;

use super::estimate::{Estimator, FeatureTable, MIN_SAMPLES};
use super::{core_from_stats, feature_tables, Core, ErrorMethod, Metrics, TraceSet, Uncertainties};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sideband::PdhReadout;

pub const MIN_BOOTSTRAP_RESAMPLES: usize = 100;

fn draw(rng: &mut impl Rng, n: usize) -> Vec<u32> {
    (0..n).map(|_| rng.random_range(0..n as u32)).collect()
}

fn resample(tables: &[FeatureTable; 4], joint: [bool; 2], pdh: &PdhReadout, seed: u64) -> Core {
    let mut rng = rng_from_seed(seed);
    let mut stats = Vec::with_capacity(4);
    for (pair, &shared) in joint.iter().enumerate() {
        let (first, second) = (&tables[2 * pair], &tables[2 * pair + 1]);
        let idx = draw(&mut rng, first.rows());
        stats.push(first.resampled(&idx));
        if shared {
            stats.push(second.resampled(&idx));
        } else {
            stats.push(second.resampled(&draw(&mut rng, second.rows())));
        }
    }
    core_from_stats([&stats[0], &stats[1], &stats[2], &stats[3]], pdh)
}

/// Sample standard deviation over the finite values.
fn spread(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in values.filter(|v| v.is_finite()) {
        n += 1;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    if n < 2 {
        (f64::NAN, n)
    } else {
        ((m2 / (n - 1) as f64).sqrt(), n)
    }
}

/// Standard deviation of every reconstructed entry and metric over
/// `n_resamples` bootstrap replicas. Replica `k` draws from the stream
/// `derive_seed(seed, k)`, so the result does not depend on scheduling.
pub fn bootstrap_errors(
    traces: &TraceSet,
    pdh: &PdhReadout,
    n_resamples: usize,
    seed: u64,
    estimator: Estimator,
) -> Result<Uncertainties> {
    if n_resamples < MIN_BOOTSTRAP_RESAMPLES {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_RESAMPLES} resamples, got {n_resamples}"
        )));
    }
    let tables = feature_tables(traces, estimator);
    if estimator == Estimator::Binned {
        for t in &tables {
            if t.totals().min_bin_count() < MIN_SAMPLES as f64 {
                return Err(Error::Estimator(format!(
                    "phase bins hold fewer than {MIN_SAMPLES} samples, too few to bootstrap"
                )));
            }
        }
    }
    let joint = [
        traces.trace_s().same_phases(traces.trace_a()),
        traces.trace_plus().same_phases(traces.trace_minus()),
    ];

    let replicas: Vec<Core> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|k| resample(&tables, joint, pdh, derive_seed(seed, k)))
        .collect();

    let min_valid = n_resamples / 2;
    let mut worst = n_resamples;
    let mut sd = |f: &dyn Fn(&Core) -> f64| {
        let (s, n) = spread(replicas.iter().map(f));
        worst = worst.min(n);
        s
    };
    let r_prime = Vector4::from_fn(|i, _| sd(&|c| c.r_prime[i]));
    let sigma_prime = Matrix4::from_fn(|i, j| sd(&|c| c.sigma_prime[(i, j)]));
    let r_omega = Vector4::from_fn(|i, _| sd(&|c| c.r_omega[i]));
    let sigma_omega = Matrix4::from_fn(|i, j| sd(&|c| c.sigma_omega[(i, j)]));
    let mut metric_sd = [f64::NAN; 10];
    for (k, slot) in metric_sd.iter_mut().enumerate() {
        // metrics may be undefined on some replicas without failing the run
        *slot = spread(replicas.iter().map(|c| c.metrics.to_array()[k])).0;
    }
    if worst < min_valid {
        return Err(Error::Estimator(format!(
            "only {worst} of {n_resamples} bootstrap replicas produced finite moments"
        )));
    }
    Ok(Uncertainties {
        method: ErrorMethod::Bootstrap { resamples: n_resamples },
        r_prime,
        sigma_prime,
        r_omega,
        sigma_omega,
        metrics: Metrics::from_array(metric_sd),
    })
}
