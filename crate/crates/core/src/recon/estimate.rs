//! Moment estimators over phase-scanned traces.
//!
//! Every estimate is a smooth function of per-sample feature sums, so the
//! bootstrap can resample sums instead of re-running the estimators on
//! materialised traces.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::HomodyneTrace;

/// Half-width of the phase bins used by [`Estimator::Binned`]: bins are
/// `π/50` wide.
pub const BIN_HALF_WIDTH: f64 = PI / 100.0;

/// Largest allowed `|⟨e^{ikθ}⟩|`, `k = 1..=4`, over a trace.
pub const COVERAGE_TOL: f64 = 0.05;

/// Fewest samples accepted in a trace, or in a phase bin.
pub const MIN_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Projection on the harmonics of the full LO sweep.
    #[default]
    Harmonic,
    /// Variances of narrow phase bins at `0, π/4, π/2, 3π/4`.
    Binned,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Harmonic => "harmonic",
            Self::Binned => "binned",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(Self::Harmonic),
            "binned" => Ok(Self::Binned),
            other => Err(Error::Config(format!(
                "unknown estimator {other:?}, expected \"harmonic\" or \"binned\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstMoments {
    pub mean_q: f64,
    pub mean_p: f64,
    pub se_q: f64,
    pub se_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
    pub se_mean_q: f64,
    pub se_mean_p: f64,
    pub se_var_q: f64,
    pub se_var_p: f64,
    pub se_cov_qp: f64,
}

impl MomentEstimates {
    /// Non-positive variance estimates are reported rather than clamped.
    pub fn has_negative_variance(&self) -> bool {
        self.var_q <= 0.0 || self.var_p <= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub eps_q: f64,
    pub eps_p: f64,
    pub se_q: f64,
    pub se_p: f64,
}

/// Bin centres used by the binned estimator, in order `q, z⁺, p, z⁻`.
const BIN_CENTRES: [f64; 4] = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];

/// Returns `(bin, sign)` when `theta` lies within a bin centred at `c` or
/// `c + π`; samples in the second half are sign-flipped since
/// `X_{θ+π} = -X_θ`.
fn bin_of(theta: f64) -> Option<(usize, f64)> {
    for (k, centre) in BIN_CENTRES.iter().enumerate() {
        let d = (theta - centre).rem_euclid(PI);
        let d = if d > FRAC_PI_2 { d - PI } else { d };
        if d.abs() <= BIN_HALF_WIDTH {
            let flipped = (theta - centre).rem_euclid(2.0 * PI);
            let sign = if flipped > FRAC_PI_2 && flipped < 3.0 * FRAC_PI_2 {
                -1.0
            } else {
                1.0
            };
            return Some((k, sign));
        }
    }
    None
}

const HARMONIC_DIM: usize = 5;
const BINNED_DIM: usize = 2 + 3 * BIN_CENTRES.len();

impl Estimator {
    pub(crate) fn feature_dim(self) -> usize {
        match self {
            Self::Harmonic => HARMONIC_DIM,
            Self::Binned => BINNED_DIM,
        }
    }

    fn push_features(self, theta: f64, x: f64, out: &mut Vec<f64>) {
        let (s, c) = theta.sin_cos();
        out.push(x * c);
        out.push(x * s);
        match self {
            Self::Harmonic => {
                let (s2, c2) = (2.0 * theta).sin_cos();
                let xx = x * x;
                out.extend_from_slice(&[xx, xx * c2, xx * s2]);
            }
            Self::Binned => {
                let start = out.len();
                out.extend_from_slice(&[0.0; 3 * BIN_CENTRES.len()]);
                if let Some((k, sign)) = bin_of(theta) {
                    let y = sign * x;
                    out[start + 3 * k] = 1.0;
                    out[start + 3 * k + 1] = y;
                    out[start + 3 * k + 2] = y * y;
                }
            }
        }
    }
}

/// Per-sample features of one trace, row-major.
#[derive(Debug, Clone)]
pub(crate) struct FeatureTable {
    estimator: Estimator,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureTable {
    pub(crate) fn new(trace: &HomodyneTrace, estimator: Estimator) -> Self {
        let dim = estimator.feature_dim();
        let mut data = Vec::with_capacity(trace.len() * dim);
        for s in trace.samples() {
            estimator.push_features(s.theta, s.x, &mut data);
        }
        Self {
            estimator,
            rows: trace.len(),
            data,
        }
    }

    pub(crate) fn rows(&self) -> usize {
        self.rows
    }

    pub(crate) fn dim(&self) -> usize {
        self.estimator.feature_dim()
    }

    pub(crate) fn totals(&self) -> TraceStats {
        let dim = self.dim();
        let mut sums = vec![0.0; dim];
        for row in self.data.chunks_exact(dim) {
            for (acc, v) in sums.iter_mut().zip(row) {
                *acc += v;
            }
        }
        TraceStats {
            estimator: self.estimator,
            n: self.rows as f64,
            sums,
        }
    }

    /// Sums over the rows listed in `indices`, repetitions counted.
    pub(crate) fn resampled(&self, indices: &[u32]) -> TraceStats {
        let dim = self.dim();
        let mut sums = vec![0.0; dim];
        for &i in indices {
            let row = &self.data[i as usize * dim..(i as usize + 1) * dim];
            for (acc, v) in sums.iter_mut().zip(row) {
                *acc += v;
            }
        }
        TraceStats {
            estimator: self.estimator,
            n: indices.len() as f64,
            sums,
        }
    }
}

/// Feature sums of a (possibly resampled) trace.
#[derive(Debug, Clone)]
pub(crate) struct TraceStats {
    estimator: Estimator,
    n: f64,
    sums: Vec<f64>,
}

/// Second moments `(⟨q²⟩, ⟨p²⟩, ⟨qp⟩_sym)` without mean subtraction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RawSecond {
    pub qq: f64,
    pub pp: f64,
    pub qp: f64,
}

impl TraceStats {
    fn avg(&self, k: usize) -> f64 {
        self.sums[k] / self.n
    }

    pub(crate) fn means(&self) -> (f64, f64) {
        (2.0 * self.avg(0), 2.0 * self.avg(1))
    }

    fn bin(&self, k: usize) -> (f64, f64, f64) {
        let base = 2 + 3 * k;
        let count = self.sums[base];
        (count, self.sums[base + 1], self.sums[base + 2])
    }

    pub(crate) fn raw_second(&self) -> RawSecond {
        match self.estimator {
            Estimator::Harmonic => {
                // ⟨x²⟩ = (Q + P)/2, ⟨x² cos 2θ⟩ = (Q - P)/4, ⟨x² sin 2θ⟩ = C/2
                let m2 = self.avg(2);
                let hc = self.avg(3);
                let hs = self.avg(4);
                RawSecond {
                    qq: m2 + 2.0 * hc,
                    pp: m2 - 2.0 * hc,
                    qp: 2.0 * hs,
                }
            }
            Estimator::Binned => {
                let raw = |k: usize| {
                    let (count, _, sum_sq) = self.bin(k);
                    sum_sq / count
                };
                RawSecond {
                    qq: raw(0),
                    pp: raw(2),
                    qp: 0.5 * (raw(1) - raw(3)),
                }
            }
        }
    }

    /// Central `(var_q, var_p, cov_qp)`.
    pub(crate) fn central_second(&self) -> (f64, f64, f64) {
        match self.estimator {
            Estimator::Harmonic => {
                let (mq, mp) = self.means();
                let raw = self.raw_second();
                (raw.qq - mq * mq, raw.pp - mp * mp, raw.qp - mq * mp)
            }
            Estimator::Binned => {
                let var = |k: usize| {
                    let (count, sum, sum_sq) = self.bin(k);
                    let mean = sum / count;
                    (sum_sq - count * mean * mean) / (count - 1.0)
                };
                (var(0), var(2), 0.5 * (var(1) - var(3)))
            }
        }
    }

    pub(crate) fn min_bin_count(&self) -> f64 {
        match self.estimator {
            Estimator::Harmonic => self.n,
            Estimator::Binned => (0..BIN_CENTRES.len())
                .map(|k| self.bin(k).0)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn check_coverage(trace: &HomodyneTrace) -> Result<()> {
    let n = trace.len();
    if n < MIN_SAMPLES {
        return Err(Error::Coverage(format!(
            "trace has {n} samples, at least {MIN_SAMPLES} required"
        )));
    }
    for k in 1..=4 {
        let (mut re, mut im) = (0.0, 0.0);
        for s in trace.samples() {
            let (sn, cs) = (k as f64 * s.theta).sin_cos();
            re += cs;
            im += sn;
        }
        let resultant = (re * re + im * im).sqrt() / n as f64;
        if resultant > COVERAGE_TOL {
            return Err(Error::Coverage(format!(
                "LO phases are not spread over [0, 2π): |<exp({k}iθ)>| = {resultant:.3} exceeds {COVERAGE_TOL}"
            )));
        }
    }
    Ok(())
}

fn mean_and_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    let var = if n > 1.0 { m2 / (n - 1.0) } else { f64::NAN };
    (mean, (var / n).sqrt())
}

/// `⟨q⟩ = 2⟨x cos θ⟩`, `⟨p⟩ = 2⟨x sin θ⟩` over a uniform LO sweep; errors from
/// the sample variance of the projectors.
pub fn estimate_first_moments(trace: &HomodyneTrace) -> Result<FirstMoments> {
    check_coverage(trace)?;
    let (mean_q, se_q) = mean_and_se(trace.samples().iter().map(|s| 2.0 * s.x * s.theta.cos()));
    let (mean_p, se_p) = mean_and_se(trace.samples().iter().map(|s| 2.0 * s.x * s.theta.sin()));
    Ok(FirstMoments {
        mean_q,
        mean_p,
        se_q,
        se_p,
    })
}

fn binned_variance_se(trace: &HomodyneTrace, bin: usize) -> Result<(f64, f64, f64)> {
    let values: Vec<f64> = trace
        .samples()
        .iter()
        .filter_map(|s| match bin_of(s.theta) {
            Some((k, sign)) if k == bin => Some(sign * s.x),
            _ => None,
        })
        .collect();
    let n = values.len();
    if n < MIN_SAMPLES {
        return Err(Error::Estimator(format!(
            "phase bin at {:.4} rad holds {n} samples, at least {MIN_SAMPLES} required",
            BIN_CENTRES[bin]
        )));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    Ok((mean, var, ((m4 - var * var).max(0.0) / nf).sqrt()))
}

/// Covariance matrix entries of the mode measured by `trace`.
pub fn estimate_second_moments(
    trace: &HomodyneTrace,
    first: &FirstMoments,
    estimator: Estimator,
) -> Result<MomentEstimates> {
    check_coverage(trace)?;
    let (mq, mp) = (first.mean_q, first.mean_p);
    let (var_q, var_p, cov_qp, se_var_q, se_var_p, se_cov_qp) = match estimator {
        Estimator::Harmonic => {
            let stats = FeatureTable::new(trace, estimator).totals();
            let raw = stats.raw_second();
            // influence functions of the mean-subtracted projections
            let infl = |f: &dyn Fn(f64, f64, f64, f64, f64) -> f64| {
                mean_and_se(trace.samples().iter().map(|s| {
                    let (sn, cs) = s.theta.sin_cos();
                    let (s2, c2) = (2.0 * s.theta).sin_cos();
                    f(s.x, cs, sn, c2, s2)
                }))
                .1
            };
            let se_q = infl(&|x, c, _, c2, _| x * x * (1.0 + 2.0 * c2) - 4.0 * mq * x * c);
            let se_p = infl(&|x, _, s, c2, _| x * x * (1.0 - 2.0 * c2) - 4.0 * mp * x * s);
            let se_c = infl(&|x, c, s, _, s2| 2.0 * x * x * s2 - 2.0 * mp * x * c - 2.0 * mq * x * s);
            (raw.qq - mq * mq, raw.pp - mp * mp, raw.qp - mq * mp, se_q, se_p, se_c)
        }
        Estimator::Binned => {
            let (_, vq, se_q) = binned_variance_se(trace, 0)?;
            let (_, vplus, se_plus) = binned_variance_se(trace, 1)?;
            let (_, vp, se_p) = binned_variance_se(trace, 2)?;
            let (_, vminus, se_minus) = binned_variance_se(trace, 3)?;
            (
                vq,
                vp,
                0.5 * (vplus - vminus),
                se_q,
                se_p,
                0.5 * (se_plus * se_plus + se_minus * se_minus).sqrt(),
            )
        }
    };
    Ok(MomentEstimates {
        mean_q: mq,
        mean_p: mp,
        var_q,
        var_p,
        cov_qp,
        se_mean_q: first.se_q,
        se_mean_p: first.se_p,
        se_var_q,
        se_var_p,
        se_cov_qp,
    })
}

pub(crate) fn epsilon_from_stats(
    plus: &TraceStats,
    minus: &TraceStats,
    means_s: (f64, f64),
    means_a: (f64, f64),
) -> (f64, f64) {
    let (p, m) = (plus.raw_second(), minus.raw_second());
    (
        0.5 * (p.qq - m.qq) - means_s.0 * means_a.0,
        0.5 * (p.pp - m.pp) - means_s.1 * means_a.1,
    )
}

/// `ε_l = ½(⟨l₊²⟩ - ⟨l₋²⟩) - ⟨l_s⟩⟨l_a⟩` from the `Ψ = ±π/4` traces.
pub fn estimate_epsilon(
    plus: &HomodyneTrace,
    minus: &HomodyneTrace,
    means_s: &FirstMoments,
    means_a: &FirstMoments,
    estimator: Estimator,
) -> Result<EpsilonEstimate> {
    check_coverage(plus)?;
    check_coverage(minus)?;
    let tp = FeatureTable::new(plus, estimator);
    let tm = FeatureTable::new(minus, estimator);
    let (sp, sm) = (tp.totals(), tm.totals());
    if estimator == Estimator::Binned && sp.min_bin_count().min(sm.min_bin_count()) < MIN_SAMPLES as f64 {
        return Err(Error::Estimator("phase bins of the ±π/4 traces are too sparse".into()));
    }
    let (eps_q, eps_p) = epsilon_from_stats(
        &sp,
        &sm,
        (means_s.mean_q, means_s.mean_p),
        (means_a.mean_q, means_a.mean_p),
    );

    // Per-sample contributions to the raw second moments.
    let raw_terms = |trace: &HomodyneTrace| -> (Vec<f64>, Vec<f64>) {
        let n = trace.len() as f64;
        let (count_q, count_p) = (bin_count(trace, 0), bin_count(trace, 2));
        trace
            .samples()
            .iter()
            .map(|s| match estimator {
                Estimator::Harmonic => {
                    let c2 = (2.0 * s.theta).cos();
                    (s.x * s.x * (1.0 + 2.0 * c2), s.x * s.x * (1.0 - 2.0 * c2))
                }
                Estimator::Binned => match bin_of(s.theta) {
                    Some((0, _)) => (s.x * s.x * n / count_q, 0.0),
                    Some((2, _)) => (0.0, s.x * s.x * n / count_p),
                    _ => (0.0, 0.0),
                },
            })
            .unzip()
    };
    let (pq, pp) = raw_terms(plus);
    let (mq, mp) = raw_terms(minus);
    let se = |a: &[f64], b: &[f64]| {
        if a.len() == b.len() {
            // paired channels share the optical sample
            mean_and_se(a.iter().zip(b).map(|(x, y)| 0.5 * (x - y))).1
        } else {
            let sa = mean_and_se(a.iter().copied()).1;
            let sb = mean_and_se(b.iter().copied()).1;
            0.5 * (sa * sa + sb * sb).sqrt()
        }
    };
    Ok(EpsilonEstimate {
        eps_q,
        eps_p,
        se_q: se(&pq, &mq),
        se_p: se(&pp, &mp),
    })
}

fn bin_count(trace: &HomodyneTrace, bin: usize) -> f64 {
    trace
        .samples()
        .iter()
        .filter(|s| matches!(bin_of(s.theta), Some((k, _)) if k == bin))
        .count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{change_basis, tmst_state, GaussianTwoModeState, ModalBasis, TmstParams};
    use crate::synth::{synthesize_dual, synthesize_trace, Sample, TraceConfig, TraceMeta};
    use approx::assert_abs_diff_eq;
    use nalgebra::{Complex, Matrix4, Vector4};
    use std::f64::consts::TAU;

    fn config(n: usize, seed: u64) -> TraceConfig {
        TraceConfig {
            n_samples: n,
            visibility: 1.0,
            rng_seed: seed,
            ..TraceConfig::default()
        }
    }

    fn sym(alpha: f64, n_sq: f64, n_th: f64, r_th: f64) -> GaussianTwoModeState {
        change_basis(&tmst_state(&TmstParams::new(Complex::new(alpha, 0.0), n_sq, n_th, r_th).unwrap()).unwrap())
    }

    fn noiseless(n: usize, f: impl Fn(f64) -> f64) -> HomodyneTrace {
        let samples = (0..n)
            .map(|i| {
                let theta = TAU * i as f64 / n as f64;
                Sample { theta, x: f(theta) }
            })
            .collect();
        HomodyneTrace::new(0.0, samples, TraceMeta::default()).unwrap()
    }

    #[test]
    fn bins_fold_opposite_phases() {
        assert_eq!(bin_of(0.0), Some((0, 1.0)));
        assert_eq!(bin_of(PI), Some((0, -1.0)));
        assert_eq!(bin_of(TAU - 0.01), Some((0, 1.0)));
        assert_eq!(bin_of(FRAC_PI_2 + PI + 0.02), Some((2, -1.0)));
        assert_eq!(bin_of(3.0 * FRAC_PI_4), Some((3, 1.0)));
        assert_eq!(bin_of(0.3), None);
    }

    #[test]
    fn noiseless_first_moments() {
        let trace = noiseless(1000, |t| 2.0 * t.cos());
        let m = estimate_first_moments(&trace).unwrap();
        assert_abs_diff_eq!(m.mean_q, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean_p, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_recovers_exact_quadratic_form() {
        // x(θ)² = Q c² + P s² + 2 C s c exactly with x = a cos θ + b sin θ
        let (a, b) = (1.3, -0.4);
        let trace = noiseless(4000, |t| a * t.cos() + b * t.sin());
        let stats = FeatureTable::new(&trace, Estimator::Harmonic).totals();
        let raw = stats.raw_second();
        assert_abs_diff_eq!(raw.qq, a * a, epsilon = 1e-12);
        assert_abs_diff_eq!(raw.pp, b * b, epsilon = 1e-12);
        assert_abs_diff_eq!(raw.qp, a * b, epsilon = 1e-12);
        let (vq, vp, c) = stats.central_second();
        assert_abs_diff_eq!(vq, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vp, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coverage_is_checked() {
        let samples = (0..100)
            .map(|i| Sample {
                theta: 0.001 * i as f64,
                x: 1.0,
            })
            .collect();
        let clustered = HomodyneTrace::new(0.0, samples, TraceMeta::default()).unwrap();
        assert!(matches!(estimate_first_moments(&clustered), Err(Error::Coverage(_))));
        let short = noiseless(5, |_| 0.0);
        assert!(matches!(estimate_first_moments(&short), Err(Error::Coverage(_))));
    }

    #[test]
    fn vacuum_moments() {
        let vac = GaussianTwoModeState::vacuum(ModalBasis::SymAntisym);
        let trace = synthesize_trace(&vac, 0.0, &config(100_000, 21)).unwrap();
        let first = estimate_first_moments(&trace).unwrap();
        assert!(first.mean_q.abs() < 4.0 * first.se_q && first.mean_p.abs() < 4.0 * first.se_p);
        let m = estimate_second_moments(&trace, &first, Estimator::Harmonic).unwrap();
        assert!((m.var_q - 1.0).abs() < 4.0 * m.se_var_q);
        assert!((m.var_p - 1.0).abs() < 4.0 * m.se_var_p);
        assert!(m.cov_qp.abs() < 4.0 * m.se_cov_qp);
        assert!(!m.has_negative_variance());
    }

    #[test]
    fn coherent_first_moments() {
        let trace = synthesize_trace(&sym(1.0, 0.0, 0.0, 0.5), 0.0, &config(100_000, 22)).unwrap();
        let first = estimate_first_moments(&trace).unwrap();
        assert!((first.mean_q - 2.0).abs() < 4.0 * first.se_q);
        assert!(first.mean_p.abs() < 4.0 * first.se_p);
    }

    #[test]
    fn squeezed_calibration_moments() {
        let trace = synthesize_trace(&sym(0.0, 0.320, 0.471, 0.5), 0.0, &config(100_000, 23)).unwrap();
        let first = estimate_first_moments(&trace).unwrap();
        for estimator in [Estimator::Harmonic, Estimator::Binned] {
            let m = estimate_second_moments(&trace, &first, estimator).unwrap();
            assert!(
                (m.var_q - 4.32451367891512).abs() < 4.0 * m.se_var_q,
                "{estimator}: {m:?}"
            );
            assert!(
                (m.var_p - 0.5003663210848803).abs() < 4.0 * m.se_var_p,
                "{estimator}: {m:?}"
            );
            assert!(m.cov_qp.abs() < 4.0 * m.se_cov_qp, "{estimator}: {m:?}");
        }
    }

    #[test]
    fn estimators_agree_on_rotated_state() {
        // squeezed ellipse rotated by π/8 gives a non-zero q-p covariance
        let base = sym(0.0, 0.320, 0.471, 0.5);
        let phi = PI / 8.0;
        let rot = nalgebra::Matrix2::new(phi.cos(), -phi.sin(), phi.sin(), phi.cos());
        let mut l = Matrix4::zeros();
        l.fixed_view_mut::<2, 2>(0, 0).copy_from(&rot);
        l.fixed_view_mut::<2, 2>(2, 2).copy_from(&rot);
        let cm = l * base.cm() * l.transpose();
        let cm = (cm + cm.transpose()) * 0.5;
        let state = GaussianTwoModeState::new(Vector4::new(0.5, -0.3, 0.0, 0.0), cm, ModalBasis::SymAntisym).unwrap();
        let expected_cov = cm[(0, 1)];
        assert!(expected_cov.abs() > 1.0);

        let trace = synthesize_trace(&state, 0.0, &config(200_000, 24)).unwrap();
        let first = estimate_first_moments(&trace).unwrap();
        let h = estimate_second_moments(&trace, &first, Estimator::Harmonic).unwrap();
        let b = estimate_second_moments(&trace, &first, Estimator::Binned).unwrap();
        assert!((h.cov_qp - expected_cov).abs() < 4.0 * h.se_cov_qp, "{h:?}");
        let combined = |x: f64, y: f64| (x * x + y * y).sqrt();
        assert!((h.cov_qp - b.cov_qp).abs() < 4.0 * combined(h.se_cov_qp, b.se_cov_qp));
        assert!((h.var_q - b.var_q).abs() < 4.0 * combined(h.se_var_q, b.se_var_q));
        assert!((h.var_p - b.var_p).abs() < 4.0 * combined(h.se_var_p, b.se_var_p));
    }

    #[test]
    fn epsilon_examples() {
        let run = |state: &GaussianTwoModeState, seed: u64, estimator: Estimator| {
            let (ts, ta) = synthesize_dual(state, 0.0, &config(100_000, seed)).unwrap();
            let (tm, tp) = synthesize_dual(state, -FRAC_PI_4, &config(100_000, seed + 1)).unwrap();
            let fs = estimate_first_moments(&ts).unwrap();
            let fa = estimate_first_moments(&ta).unwrap();
            estimate_epsilon(&tp, &tm, &fs, &fa, estimator).unwrap()
        };

        let tmst = sym(0.0, 0.320, 0.471, 0.5);
        let e = run(&tmst, 30, Estimator::Harmonic);
        assert!(e.eps_q.abs() < 4.0 * e.se_q && e.eps_p.abs() < 4.0 * e.se_p, "{e:?}");

        let mut cm = Matrix4::identity() * 1.5;
        cm[(0, 2)] = 0.3;
        cm[(2, 0)] = 0.3;
        let injected = GaussianTwoModeState::new(Vector4::zeros(), cm, ModalBasis::SymAntisym).unwrap();
        for estimator in [Estimator::Harmonic, Estimator::Binned] {
            let e = run(&injected, 40, estimator);
            assert!((e.eps_q - 0.3).abs() < 4.0 * e.se_q, "{estimator}: {e:?}");
            assert!(e.eps_p.abs() < 4.0 * e.se_p, "{estimator}: {e:?}");
        }

        let coherent = sym(1.0, 0.0, 0.0, 0.5);
        let e = run(&coherent, 50, Estimator::Harmonic);
        assert!(e.eps_q.abs() < 4.0 * e.se_q && e.eps_p.abs() < 4.0 * e.se_p, "{e:?}");
    }

    #[test]
    fn estimator_names() {
        assert_eq!("binned".parse::<Estimator>().unwrap(), Estimator::Binned);
        assert_eq!(Estimator::Harmonic.to_string(), "harmonic");
        assert!("ml".parse::<Estimator>().is_err());
    }
}
