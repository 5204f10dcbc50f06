//! Reconstruction of the two-mode covariance matrix from four mixer-phase
//! traces and the cavity readout.
//!
//! The symmetric/antisymmetric blocks come from the `Ψ = 0, π/2` traces, the
//! `ε` entries from `Ψ = ±π/4`, and the `δ` entries from the sideband
//! transmission unbalance, which homodyne data cannot see.

mod bootstrap;
mod estimate;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    block, change_basis, check_physicality, noise_reduction_db, ppt_min_symplectic_eigenvalue, purity,
    symplectic_eigenvalues, total_fluctuation_photons, GaussianTwoModeState, ModalBasis, DEFAULT_PHYSICALITY_TOL,
};
use crate::sideband::{canonical_angle, unbalance_from_pdh, PdhReadout};
use crate::synth::HomodyneTrace;

pub use bootstrap::{bootstrap_errors, MIN_BOOTSTRAP_RESAMPLES};
pub use estimate::{
    estimate_epsilon, estimate_first_moments, estimate_second_moments, EpsilonEstimate, Estimator, FirstMoments,
    MomentEstimates, BIN_HALF_WIDTH, COVERAGE_TOL, MIN_SAMPLES,
};

use estimate::{epsilon_from_stats, FeatureTable, TraceStats};

/// Tolerance on the mixer phase of each trace in a [`TraceSet`].
pub const PSI_TOL: f64 = 1e-9;

/// The four mixer-phase traces `Ψ = 0, π/2, +π/4, -π/4`.
#[derive(Debug, Clone)]
pub struct TraceSet {
    trace_s: HomodyneTrace,
    trace_a: HomodyneTrace,
    trace_plus: HomodyneTrace,
    trace_minus: HomodyneTrace,
}

fn check_psi(trace: &HomodyneTrace, expected: f64, label: &str) -> Result<()> {
    let diff = canonical_angle(trace.psi() - expected);
    if diff.min(std::f64::consts::TAU - diff) > PSI_TOL {
        return Err(Error::InvalidParameter(format!(
            "{label} trace has mixer phase {} rad, expected {} rad",
            trace.psi(),
            canonical_angle(expected)
        )));
    }
    Ok(())
}

impl TraceSet {
    pub fn new(
        trace_s: HomodyneTrace,
        trace_a: HomodyneTrace,
        trace_plus: HomodyneTrace,
        trace_minus: HomodyneTrace,
    ) -> Result<Self> {
        check_psi(&trace_s, 0.0, "symmetric")?;
        check_psi(&trace_a, FRAC_PI_2, "antisymmetric")?;
        check_psi(&trace_plus, FRAC_PI_4, "+π/4")?;
        check_psi(&trace_minus, -FRAC_PI_4, "-π/4")?;
        let scenario = &trace_s.meta().scenario;
        for other in [&trace_a, &trace_plus, &trace_minus] {
            if &other.meta().scenario != scenario {
                return Err(Error::InvalidParameter(format!(
                    "traces come from different scenarios: {scenario:?} and {:?}",
                    other.meta().scenario
                )));
            }
        }
        Ok(Self {
            trace_s,
            trace_a,
            trace_plus,
            trace_minus,
        })
    }

    pub fn trace_s(&self) -> &HomodyneTrace {
        &self.trace_s
    }

    pub fn trace_a(&self) -> &HomodyneTrace {
        &self.trace_a
    }

    pub fn trace_plus(&self) -> &HomodyneTrace {
        &self.trace_plus
    }

    pub fn trace_minus(&self) -> &HomodyneTrace {
        &self.trace_minus
    }

    pub fn scenario(&self) -> &str {
        &self.trace_s.meta().scenario
    }

    pub(crate) fn all(&self) -> [&HomodyneTrace; 4] {
        [&self.trace_s, &self.trace_a, &self.trace_plus, &self.trace_minus]
    }
}

/// `σ′` in the symmetric/antisymmetric basis with off-block
/// `[[ε_q, ΔN], [-ΔN, ε_p]]`, and `R′ = (⟨q_s⟩, ⟨p_s⟩, ⟨q_a⟩, ⟨p_a⟩)`.
pub fn assemble_cm(
    moments_s: &MomentEstimates,
    moments_a: &MomentEstimates,
    eps: &EpsilonEstimate,
    delta_n: f64,
) -> (Matrix4<f64>, Vector4<f64>) {
    assemble_raw(
        (moments_s.var_q, moments_s.var_p, moments_s.cov_qp),
        (moments_a.var_q, moments_a.var_p, moments_a.cov_qp),
        (eps.eps_q, eps.eps_p),
        delta_n,
        Vector4::new(moments_s.mean_q, moments_s.mean_p, moments_a.mean_q, moments_a.mean_p),
    )
}

fn assemble_raw(
    s: (f64, f64, f64),
    a: (f64, f64, f64),
    eps: (f64, f64),
    delta_n: f64,
    r: Vector4<f64>,
) -> (Matrix4<f64>, Vector4<f64>) {
    let sigma = Matrix4::new(
        s.0, s.2, eps.0, delta_n, //
        s.2, s.1, -delta_n, eps.1, //
        eps.0, -delta_n, a.0, a.2, //
        delta_n, eps.1, a.2, a.1,
    );
    (sigma, r)
}

/// `N_Ω = ¼ tr σ′ - 1`.
pub fn n_total_from_cm(sigma_prime: &Matrix4<f64>) -> f64 {
    total_fluctuation_photons(sigma_prime)
}

/// `(σ_Ω, R_Ω) = (Sᵀσ′S, SᵀR′)`.
pub fn transform_to_sidebands(
    sigma_prime: &Matrix4<f64>,
    r_prime: &Vector4<f64>,
) -> Result<(Matrix4<f64>, Vector4<f64>)> {
    let state = GaussianTwoModeState::new(*r_prime, *sigma_prime, ModalBasis::SymAntisym)?;
    let sidebands = change_basis(&state);
    Ok((*sidebands.cm(), *sidebands.first_moments()))
}

/// Scalar figures of merit of a reconstruction. Entries that are undefined
/// for the reconstructed matrix (for example a purity of a block that is not
/// positive definite) are `NaN`. The entry type is generic so that errors and
/// aggregate summaries share the layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T = f64> {
    pub purity_s: T,
    pub purity_a: T,
    pub noise_reduction_db_s: T,
    pub noise_reduction_db_a: T,
    /// Smallest symplectic eigenvalue of the partial transpose of `σ_Ω`.
    pub ppt_min: T,
    pub symplectic_min: T,
    pub symplectic_max: T,
    /// Smallest eigenvalue of `σ′ + iΩ`.
    pub physicality_margin: T,
    pub n_total: T,
    pub delta_n: T,
}

pub const METRIC_NAMES: [&str; 10] = [
    "purity_s",
    "purity_a",
    "noise_reduction_db_s",
    "noise_reduction_db_a",
    "ppt_min",
    "symplectic_min",
    "symplectic_max",
    "physicality_margin",
    "n_total",
    "delta_n",
];

impl<T: Clone> Metrics<T> {
    /// Entries in [`METRIC_NAMES`] order.
    pub fn to_array(&self) -> [T; 10] {
        [
            self.purity_s.clone(),
            self.purity_a.clone(),
            self.noise_reduction_db_s.clone(),
            self.noise_reduction_db_a.clone(),
            self.ppt_min.clone(),
            self.symplectic_min.clone(),
            self.symplectic_max.clone(),
            self.physicality_margin.clone(),
            self.n_total.clone(),
            self.delta_n.clone(),
        ]
    }

    pub fn from_array(v: [T; 10]) -> Self {
        let [purity_s, purity_a, noise_reduction_db_s, noise_reduction_db_a, ppt_min, symplectic_min, symplectic_max, physicality_margin, n_total, delta_n] =
            v;
        Self {
            purity_s,
            purity_a,
            noise_reduction_db_s,
            noise_reduction_db_a,
            ppt_min,
            symplectic_min,
            symplectic_max,
            physicality_margin,
            n_total,
            delta_n,
        }
    }
}

impl Metrics {
    pub fn compute(sigma_prime: &Matrix4<f64>, sigma_omega: &Matrix4<f64>, delta_n: f64) -> Self {
        let or_nan = |r: Result<f64>| r.unwrap_or(f64::NAN);
        let (s, a) = (block(sigma_prime, 0, 0), block(sigma_prime, 1, 1));
        let (nu_min, nu_max) = symplectic_eigenvalues(sigma_prime).unwrap_or((f64::NAN, f64::NAN));
        Self {
            purity_s: or_nan(purity(&s)),
            purity_a: or_nan(purity(&a)),
            noise_reduction_db_s: or_nan(noise_reduction_db(&s)),
            noise_reduction_db_a: or_nan(noise_reduction_db(&a)),
            ppt_min: or_nan(ppt_min_symplectic_eigenvalue(sigma_omega)),
            symplectic_min: nu_min,
            symplectic_max: nu_max,
            physicality_margin: or_nan(check_physicality(sigma_prime, DEFAULT_PHYSICALITY_TOL).map(|p| p.margin)),
            n_total: n_total_from_cm(sigma_prime),
            delta_n,
        }
    }

    /// `λ̃ < 1`.
    pub fn entangled(&self) -> bool {
        self.ppt_min < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMethod {
    /// First-order propagation of the estimator variances; metrics carry no
    /// errors.
    Analytic,
    Bootstrap {
        resamples: usize,
    },
}

/// Per-entry standard errors matching a [`ReconstructedState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Uncertainties {
    pub method: ErrorMethod,
    pub r_prime: Vector4<f64>,
    pub sigma_prime: Matrix4<f64>,
    pub r_omega: Vector4<f64>,
    pub sigma_omega: Matrix4<f64>,
    pub metrics: Metrics,
}

impl Uncertainties {
    /// Largest standard error among the entries of `σ′`.
    pub fn max_sigma_prime(&self) -> f64 {
        self.sigma_prime.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedState {
    pub estimator: Estimator,
    pub pdh: PdhReadout,
    pub moments_s: MomentEstimates,
    pub moments_a: MomentEstimates,
    pub epsilon: EpsilonEstimate,
    pub r_prime: Vector4<f64>,
    pub sigma_prime: Matrix4<f64>,
    pub delta_n: f64,
    pub r_omega: Vector4<f64>,
    pub sigma_omega: Matrix4<f64>,
    pub metrics: Metrics,
    pub uncertainties: Uncertainties,
}

impl ReconstructedState {
    /// The reconstructed state in the sideband basis.
    pub fn sideband_state(&self) -> Result<GaussianTwoModeState> {
        GaussianTwoModeState::new(self.r_omega, self.sigma_omega, ModalBasis::SidebandPm)
    }

    pub fn is_physical(&self) -> bool {
        self.metrics.physicality_margin >= -DEFAULT_PHYSICALITY_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconstructOptions {
    pub estimator: Estimator,
    /// `0` selects analytic error propagation.
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::Harmonic,
            bootstrap_resamples: 500,
            seed: 0,
        }
    }
}

/// Matrices and metrics that depend on the data only through feature sums.
#[derive(Debug, Clone)]
pub(crate) struct Core {
    pub r_prime: Vector4<f64>,
    pub sigma_prime: Matrix4<f64>,
    pub r_omega: Vector4<f64>,
    pub sigma_omega: Matrix4<f64>,
    pub metrics: Metrics,
}

pub(crate) fn core_from_stats(stats: [&TraceStats; 4], pdh: &PdhReadout) -> Core {
    let [s, a, plus, minus] = stats;
    let (ms, ma) = (s.means(), a.means());
    let (sigma_prime, r_prime) = assemble_raw(
        s.central_second(),
        a.central_second(),
        epsilon_from_stats(plus, minus, ms, ma),
        0.0,
        Vector4::new(ms.0, ms.1, ma.0, ma.1),
    );
    finish_core(sigma_prime, r_prime, pdh)
}

fn finish_core(mut sigma_prime: Matrix4<f64>, r_prime: Vector4<f64>, pdh: &PdhReadout) -> Core {
    // the δ entries do not touch the diagonal, so N_Ω can be read first
    let delta_n = unbalance_from_pdh(pdh, n_total_from_cm(&sigma_prime));
    sigma_prime[(0, 3)] = delta_n;
    sigma_prime[(3, 0)] = delta_n;
    sigma_prime[(1, 2)] = -delta_n;
    sigma_prime[(2, 1)] = -delta_n;
    let (sigma_omega, r_omega) = match transform_to_sidebands(&sigma_prime, &r_prime) {
        Ok(pair) => pair,
        Err(_) => (Matrix4::repeat(f64::NAN), Vector4::repeat(f64::NAN)),
    };
    Core {
        metrics: Metrics::compute(&sigma_prime, &sigma_omega, delta_n),
        r_prime,
        sigma_prime,
        r_omega,
        sigma_omega,
    }
}

fn analytic_errors(
    ms: &MomentEstimates,
    ma: &MomentEstimates,
    eps: &EpsilonEstimate,
    pdh: &PdhReadout,
) -> Uncertainties {
    let r_prime = Vector4::new(ms.se_mean_q, ms.se_mean_p, ma.se_mean_q, ma.se_mean_p);
    let diag_var = [ms.se_var_q, ms.se_var_p, ma.se_var_q, ma.se_var_p];
    let se_n = 0.25 * diag_var.iter().map(|v| v * v).sum::<f64>().sqrt();
    let se_delta = (pdh.tau_plus - pdh.tau_minus).abs() * se_n;
    let (sigma_prime, _) = assemble_raw(
        (ms.se_var_q, ms.se_var_p, ms.se_cov_qp),
        (ma.se_var_q, ma.se_var_p, ma.se_cov_qp),
        (eps.se_q, eps.se_p),
        se_delta,
        r_prime,
    );
    let sigma_prime = sigma_prime.abs();

    // independent entries: variances add with squared coefficients
    let s = crate::gaussian::mode_mixing_matrix();
    let st = s.transpose();
    let var_p = sigma_prime.component_mul(&sigma_prime);
    let sigma_omega = Matrix4::from_fn(|i, j| {
        let mut v = 0.0;
        for k in 0..4 {
            for l in 0..4 {
                v += (st[(i, k)] * s[(l, j)]).powi(2) * var_p[(k, l)];
            }
        }
        v.sqrt()
    });
    let st2 = st.component_mul(&st);
    let r_omega = (st2 * r_prime.component_mul(&r_prime)).map(f64::sqrt);

    let mut metrics = Metrics::from_array([f64::NAN; 10]);
    metrics.n_total = se_n;
    metrics.delta_n = se_delta;
    Uncertainties {
        method: ErrorMethod::Analytic,
        r_prime,
        sigma_prime,
        r_omega,
        sigma_omega,
        metrics,
    }
}

/// Runs the full reconstruction chain on `traces`.
pub fn reconstruct(traces: &TraceSet, pdh: &PdhReadout, options: &ReconstructOptions) -> Result<ReconstructedState> {
    pdh.validate()?;
    let first_s = estimate_first_moments(traces.trace_s())?;
    let first_a = estimate_first_moments(traces.trace_a())?;
    let moments_s = estimate_second_moments(traces.trace_s(), &first_s, options.estimator)?;
    let moments_a = estimate_second_moments(traces.trace_a(), &first_a, options.estimator)?;
    let epsilon = estimate_epsilon(
        traces.trace_plus(),
        traces.trace_minus(),
        &first_s,
        &first_a,
        options.estimator,
    )?;

    let (sigma_prime, r_prime) = assemble_cm(&moments_s, &moments_a, &epsilon, 0.0);
    let core = finish_core(sigma_prime, r_prime, pdh);

    let uncertainties = if options.bootstrap_resamples == 0 {
        analytic_errors(&moments_s, &moments_a, &epsilon, pdh)
    } else {
        bootstrap_errors(
            traces,
            pdh,
            options.bootstrap_resamples,
            options.seed,
            options.estimator,
        )?
    };

    Ok(ReconstructedState {
        estimator: options.estimator,
        pdh: *pdh,
        moments_s,
        moments_a,
        epsilon,
        r_prime: core.r_prime,
        sigma_prime: core.sigma_prime,
        delta_n: core.metrics.delta_n,
        r_omega: core.r_omega,
        sigma_omega: core.sigma_omega,
        metrics: core.metrics,
        uncertainties,
    })
}

pub(crate) fn feature_tables(traces: &TraceSet, estimator: Estimator) -> [FeatureTable; 4] {
    traces.all().map(|t| FeatureTable::new(t, estimator))
}

/// Single-mode block helper for reports: `σ_s` or `σ_a` of `σ′`.
pub fn mode_block(sigma_prime: &Matrix4<f64>, mode: usize) -> Matrix2<f64> {
    block(sigma_prime, mode, mode)
}
