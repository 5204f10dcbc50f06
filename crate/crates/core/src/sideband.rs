//! Mixer-phase selection of sideband combinations and the cavity readout of
//! the sideband energy unbalance.
//!
//! A homodyne photocurrent demodulated at `Ω` with mixer phase `Ψ` measures
//! `X_θ(Ψ) = cos Ψ (q_s cos θ + p_s sin θ) + sin Ψ (q_a cos θ + p_a sin θ)`,
//! a linear form on the symmetric/antisymmetric quadratures.

use std::f64::consts::TAU;

use nalgebra::{Complex, Matrix2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianTwoModeState, ModalBasis};

/// Wraps an angle into `[0, 2π)`.
pub fn canonical_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// LO phase `theta` and mixer phase `psi`, both in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    theta: f64,
    psi: f64,
}

impl QuadratureSpec {
    pub fn new(theta: f64, psi: f64) -> Result<Self> {
        if !(theta.is_finite() && psi.is_finite()) {
            return Err(Error::InvalidParameter("quadrature phases must be finite".into()));
        }
        Ok(Self {
            theta: canonical_angle(theta),
            psi: canonical_angle(psi),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }
}

/// Coefficients `u` with `X_θ(Ψ) = u · r′` in the symmetric/antisymmetric basis.
pub fn selection_vector(spec: &QuadratureSpec) -> Vector4<f64> {
    let (st, ct) = spec.theta.sin_cos();
    let (sp, cp) = spec.psi.sin_cos();
    Vector4::new(cp * ct, cp * st, sp * ct, sp * st)
}

/// Projections of the symmetric/antisymmetric state onto the LO direction
/// `w = (cos θ, sin θ)`, from which the statistics of every mixer phase at
/// that `θ` follow.
///
/// The off-diagonal block only enters through its symmetric part, so the
/// `δ_qp = -δ_pq` entries cancel exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoProjection {
    mean_s: f64,
    mean_a: f64,
    var_s: f64,
    var_a: f64,
    cross: f64,
}

impl LoProjection {
    pub fn new(state: &GaussianTwoModeState, theta: f64) -> Result<Self> {
        if state.basis() != ModalBasis::SymAntisym {
            return Err(Error::WrongBasis {
                expected: ModalBasis::SymAntisym,
            });
        }
        Ok(Self::new_unchecked(state, theta))
    }

    pub(crate) fn new_unchecked(state: &GaussianTwoModeState, theta: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let w = Vector2::new(ct, st);
        let r = state.first_moments();
        let quad = |m: &Matrix2<f64>| w.dot(&(m * w));
        let off = state.block(0, 1);
        let off_sym = (off + off.transpose()) * 0.5;
        Self {
            mean_s: ct * r[0] + st * r[1],
            mean_a: ct * r[2] + st * r[3],
            var_s: quad(&state.block(0, 0)),
            var_a: quad(&state.block(1, 1)),
            cross: quad(&off_sym),
        }
    }

    pub fn mean(&self, psi: f64) -> f64 {
        let (sp, cp) = psi.sin_cos();
        cp * self.mean_s + sp * self.mean_a
    }

    /// Covariance between the quadratures measured at mixer phases `psi1` and `psi2`.
    pub fn covariance(&self, psi1: f64, psi2: f64) -> f64 {
        let (s1, c1) = psi1.sin_cos();
        let (s2, c2) = psi2.sin_cos();
        c1 * c2 * self.var_s + s1 * s2 * self.var_a + (c1 * s2 + s1 * c2) * self.cross
    }

    pub fn variance(&self, psi: f64) -> f64 {
        self.covariance(psi, psi)
    }
}

/// Mean and variance of the Gaussian marginal `X_θ(Ψ)`.
pub fn quadrature_moments(state: &GaussianTwoModeState, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let proj = LoProjection::new(state, spec.theta)?;
    let variance = proj.variance(spec.psi);
    if variance <= 0.0 {
        return Err(Error::Unphysical { margin: variance });
    }
    Ok((proj.mean(spec.psi), variance))
}

/// Single-Lorentzian model of the OPO cavity line. All frequencies in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityModel {
    pub linewidth_fwhm: f64,
    pub fsr: f64,
    /// `Ω / 2π`, the sideband offset from the carrier.
    pub sideband_offset: f64,
    /// Lock modulation frequency; only used for the error-signal shape.
    pub hf_offset: f64,
    /// Residual detuning of the carrier from the cavity resonance.
    pub detuning: f64,
}

impl CavityModel {
    /// Cavity parameters of the reference setup: 55 MHz linewidth, 3300 MHz
    /// FSR, 3 MHz sidebands and a 110 MHz lock modulation.
    pub fn reference() -> Self {
        Self {
            linewidth_fwhm: 55e6,
            fsr: 3300e6,
            sideband_offset: 3e6,
            hf_offset: 110e6,
            detuning: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.linewidth_fwhm,
            self.fsr,
            self.sideband_offset,
            self.hf_offset,
            self.detuning,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("cavity parameters must be finite".into()));
        }
        if self.linewidth_fwhm <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cavity linewidth must be positive, got {}",
                self.linewidth_fwhm
            )));
        }
        if !(self.sideband_offset > 0.0 && self.sideband_offset < 0.5 * self.fsr) {
            return Err(Error::InvalidParameter(format!(
                "sideband offset must lie in (0, fsr/2), got {} with fsr {}",
                self.sideband_offset, self.fsr
            )));
        }
        Ok(())
    }

    /// Power transmission of the line at `offset` Hz from resonance, unit peak.
    pub fn lorentzian(&self, offset: f64) -> f64 {
        let x = 2.0 * offset / self.linewidth_fwhm;
        1.0 / (1.0 + x * x)
    }
}

/// Relative transmissions `τ± = T± / (T₊ + T₋)` of the two sidebands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdhReadout {
    pub tau_plus: f64,
    pub tau_minus: f64,
}

impl PdhReadout {
    pub fn new(tau_plus: f64, tau_minus: f64) -> Result<Self> {
        let readout = Self { tau_plus, tau_minus };
        readout.validate()?;
        Ok(readout)
    }

    pub fn balanced() -> Self {
        Self {
            tau_plus: 0.5,
            tau_minus: 0.5,
        }
    }

    /// Normalises absolute transmissions into relative ones.
    pub fn from_transmissions(t_plus: f64, t_minus: f64) -> Result<Self> {
        let total = t_plus + t_minus;
        if !(t_plus >= 0.0 && t_minus >= 0.0 && total > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transmissions must be non-negative with positive sum, got {t_plus}, {t_minus}"
            )));
        }
        Ok(Self {
            tau_plus: t_plus / total,
            tau_minus: t_minus / total,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |t: f64| (0.0..=1.0).contains(&t);
        if !(in_range(self.tau_plus) && in_range(self.tau_minus)) {
            return Err(Error::InvalidParameter(format!(
                "relative transmissions must lie in [0, 1], got {} and {}",
                self.tau_plus, self.tau_minus
            )));
        }
        if (self.tau_plus + self.tau_minus - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "relative transmissions must sum to 1, got {}",
                self.tau_plus + self.tau_minus
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityTransmission {
    pub t_plus: f64,
    pub t_minus: f64,
    pub readout: PdhReadout,
}

pub fn cavity_transmission(cavity: &CavityModel) -> Result<CavityTransmission> {
    cavity.validate()?;
    let t_plus = cavity.lorentzian(cavity.detuning + cavity.sideband_offset);
    let t_minus = cavity.lorentzian(cavity.detuning - cavity.sideband_offset);
    Ok(CavityTransmission {
        t_plus,
        t_minus,
        readout: PdhReadout::from_transmissions(t_plus, t_minus)?,
    })
}

/// Sideband energy difference `N₊ - N₋ = (τ₊ - τ₋) N_Ω` given the total
/// fluctuation photons `n_total`.
pub fn unbalance_from_pdh(readout: &PdhReadout, n_total: f64) -> f64 {
    (readout.tau_plus - readout.tau_minus) * n_total
}

// Reflection of a lossless single-port cavity at `offset` Hz from resonance.
fn reflection(cavity: &CavityModel, offset: f64) -> Complex<f64> {
    let ix = Complex::new(0.0, 2.0 * offset / cavity.linewidth_fwhm);
    -(Complex::new(1.0, 0.0) - ix) / (Complex::new(1.0, 0.0) + ix)
}

fn raw_error(cavity: &CavityModel, detuning: f64) -> f64 {
    let carrier = reflection(cavity, detuning);
    let upper = reflection(cavity, detuning + cavity.hf_offset);
    let lower = reflection(cavity, detuning - cavity.hf_offset);
    (carrier * upper.conj() - carrier.conj() * lower).im
}

const PEAK_SCAN_POINTS: usize = 4001;

/// Dispersive lock error signal on `detuning_grid` (Hz), normalised so that
/// the carrier feature peaks at 1 with positive slope through resonance.
pub fn pdh_error_signal(cavity: &CavityModel, detuning_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    cavity.validate()?;
    if cavity.hf_offset <= cavity.linewidth_fwhm {
        return Err(Error::InvalidParameter(format!(
            "lock modulation {} Hz must exceed the cavity linewidth {} Hz",
            cavity.hf_offset, cavity.linewidth_fwhm
        )));
    }
    let span = cavity.linewidth_fwhm;
    let peak = (1..PEAK_SCAN_POINTS)
        .map(|k| raw_error(cavity, span * k as f64 / (PEAK_SCAN_POINTS - 1) as f64).abs())
        .fold(0.0, f64::max);
    Ok(detuning_grid
        .iter()
        .map(|&d| (d, raw_error(cavity, d) / peak))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{change_basis, tmst_state, TmstParams};
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix4;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn spec(theta: f64, psi: f64) -> QuadratureSpec {
        QuadratureSpec::new(theta, psi).unwrap()
    }

    fn squeezed_calibration() -> GaussianTwoModeState {
        let p = TmstParams::new(Complex::new(0.0, 0.0), 0.320, 0.471, 0.5).unwrap();
        change_basis(&tmst_state(&p).unwrap())
    }

    #[test]
    fn selection_vector_examples() {
        assert_abs_diff_eq!(
            selection_vector(&spec(0.0, 0.0)),
            Vector4::new(1.0, 0.0, 0.0, 0.0),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            selection_vector(&spec(FRAC_PI_2, FRAC_PI_2)),
            Vector4::new(0.0, 0.0, 0.0, 1.0),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            selection_vector(&spec(0.0, FRAC_PI_4)),
            Vector4::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn spec_canonicalises() {
        let s = spec(-FRAC_PI_4, 5.0 * TAU + 0.5);
        assert_abs_diff_eq!(s.theta(), TAU - FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(s.psi(), 0.5, epsilon = 1e-12);
        assert!(QuadratureSpec::new(f64::INFINITY, 0.0).is_err());
        assert_eq!(canonical_angle(-1e-300), 0.0);
    }

    #[test]
    fn quadrature_moment_examples() {
        let vac = GaussianTwoModeState::vacuum(ModalBasis::SymAntisym);
        for k in 0..8 {
            let (m, v) = quadrature_moments(&vac, &spec(0.4 * k as f64, 0.9 * k as f64)).unwrap();
            assert_abs_diff_eq!(m, 0.0);
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        }

        let cal = squeezed_calibration();
        let (m, v) = quadrature_moments(&cal, &spec(FRAC_PI_2, 0.0)).unwrap();
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.5003663210848803, epsilon = 1e-12);

        let coherent =
            change_basis(&tmst_state(&TmstParams::new(Complex::new(0.7, 0.3), 0.0, 0.0, 0.5).unwrap()).unwrap());
        for k in 0..16 {
            let (m, _) = quadrature_moments(&coherent, &spec(0.4 * k as f64, FRAC_PI_2)).unwrap();
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-14);
        }

        let pm = tmst_state(&TmstParams::vacuum()).unwrap();
        assert!(matches!(
            quadrature_moments(&pm, &spec(0.0, 0.0)),
            Err(Error::WrongBasis { .. })
        ));
    }

    #[test]
    fn projection_matches_selection_vector() {
        let cal = squeezed_calibration();
        let mut cm = *cal.cm();
        cm[(0, 2)] = 0.3;
        cm[(2, 0)] = 0.3;
        cm[(1, 2)] = 0.2;
        cm[(2, 1)] = 0.2;
        let state = GaussianTwoModeState::new(Vector4::new(0.4, -0.2, 0.1, 0.3), cm, ModalBasis::SymAntisym).unwrap();
        for k in 0..20 {
            let (theta, psi1, psi2) = (0.37 * k as f64, 0.11 * k as f64, 1.3 - 0.2 * k as f64);
            let u1 = selection_vector(&spec(theta, psi1));
            let u2 = selection_vector(&spec(theta, psi2));
            let proj = LoProjection::new(&state, theta).unwrap();
            assert_abs_diff_eq!(proj.mean(psi1), u1.dot(state.first_moments()), epsilon = 1e-13);
            assert_abs_diff_eq!(proj.covariance(psi1, psi2), u1.dot(&(cm * u2)), epsilon = 1e-13);
        }
    }

    #[test]
    fn epsilon_from_plus_minus_phases() {
        let mut cm = *squeezed_calibration().cm();
        cm[(0, 2)] = 0.3;
        cm[(2, 0)] = 0.3;
        cm[(1, 3)] = -0.2;
        cm[(3, 1)] = -0.2;
        let r = Vector4::new(0.6, 0.1, -0.4, 0.2);
        let state = GaussianTwoModeState::new(r, cm, ModalBasis::SymAntisym).unwrap();
        let raw_second = |theta: f64, psi: f64| {
            let (m, v) = quadrature_moments(&state, &spec(theta, psi)).unwrap();
            v + m * m
        };
        let eps_q = 0.5 * (raw_second(0.0, FRAC_PI_4) - raw_second(0.0, -FRAC_PI_4)) - r[0] * r[2];
        let eps_p = 0.5 * (raw_second(FRAC_PI_2, FRAC_PI_4) - raw_second(FRAC_PI_2, -FRAC_PI_4)) - r[1] * r[3];
        assert_abs_diff_eq!(eps_q, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(eps_p, -0.2, epsilon = 1e-12);
    }

    #[test]
    fn cavity_examples() {
        let mut cavity = CavityModel::reference();
        let t = cavity_transmission(&cavity).unwrap();
        assert_eq!(t.readout, PdhReadout::balanced());

        cavity.detuning = 5e6;
        let t = cavity_transmission(&cavity).unwrap();
        // 1 / (1 + (2·8/55)²) and 1 / (1 + (2·2/55)²)
        assert_abs_diff_eq!(t.t_plus, 0.9219750076196281, epsilon = 1e-14);
        assert_abs_diff_eq!(t.t_minus, 0.9947385728378823, epsilon = 1e-14);
        assert_abs_diff_eq!(t.readout.tau_plus, 0.4810186649794369, epsilon = 1e-14);
        assert_abs_diff_eq!(t.readout.tau_minus, 1.0 - 0.4810186649794369, epsilon = 1e-14);

        let mut prev = 0.0;
        for d in [1e8, 1e9, 1e10, 1e11] {
            cavity.detuning = d;
            let tau = cavity_transmission(&cavity).unwrap().readout.tau_plus;
            assert!(tau < 0.5 && tau > prev);
            prev = tau;
        }
        assert!(0.5 - prev < 1e-4);

        cavity.sideband_offset = 2000e6;
        assert!(cavity_transmission(&cavity).is_err());
    }

    #[test]
    fn unbalance_examples() {
        assert_eq!(unbalance_from_pdh(&PdhReadout::balanced(), 3.0), 0.0);
        let r = PdhReadout::new(0.6, 0.4).unwrap();
        assert_abs_diff_eq!(unbalance_from_pdh(&r, 2.0), 0.4, epsilon = 1e-15);
        let (tp, tm) = (0.83, 0.41);
        let r = PdhReadout::from_transmissions(tp, tm).unwrap();
        assert_abs_diff_eq!(
            unbalance_from_pdh(&r, 2.0),
            (tp - tm) / (tp + tm) * 2.0,
            epsilon = 1e-15
        );
        assert!(PdhReadout::new(0.6, 0.6).is_err());
        assert!(PdhReadout::new(1.2, -0.2).is_err());
    }

    #[test]
    fn error_signal_shape() {
        let cavity = CavityModel::reference();
        let grid: Vec<f64> = (-400..=400).map(|k| k as f64 * 0.5e6).collect();
        let signal = pdh_error_signal(&cavity, &grid).unwrap();
        let at = |i: usize| signal[i].1;
        assert_abs_diff_eq!(at(400), 0.0, epsilon = 1e-15);
        for k in 1..=400 {
            assert_abs_diff_eq!(at(400 + k), -at(400 - k), epsilon = 1e-14);
        }
        assert!(at(401) > 0.0 && at(399) < 0.0);
        let max = signal.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-3);

        let slow = CavityModel {
            hf_offset: 10e6,
            ..cavity
        };
        assert!(pdh_error_signal(&slow, &grid).is_err());
    }

    proptest! {
        #[test]
        fn selection_vector_unit_norm(theta in -20.0..20.0f64, psi in -20.0..20.0f64) {
            prop_assert!((selection_vector(&spec(theta, psi)).norm() - 1.0).abs() < 1e-14);
        }

        #[test]
        fn delta_entries_are_invisible(theta in 0.0..TAU, delta in -3.0..3.0f64, sign in prop::bool::ANY) {
            let base = squeezed_calibration();
            let mut cm: Matrix4<f64> = *base.cm();
            cm[(0, 3)] = delta;
            cm[(3, 0)] = delta;
            cm[(1, 2)] = -delta;
            cm[(2, 1)] = -delta;
            let perturbed = GaussianTwoModeState::new(*base.first_moments(), cm, ModalBasis::SymAntisym).unwrap();
            let psi = if sign { FRAC_PI_4 } else { -FRAC_PI_4 };
            let a = quadrature_moments(&base, &spec(theta, psi)).unwrap();
            let b = quadrature_moments(&perturbed, &spec(theta, psi)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn readout_sums_to_one(detuning in -1e9..1e9f64, kappa in 1e6..1e8f64) {
            let cavity = CavityModel { linewidth_fwhm: kappa, detuning, ..CavityModel::reference() };
            let r = cavity_transmission(&cavity).unwrap().readout;
            prop_assert!((r.tau_plus + r.tau_minus - 1.0).abs() <= 1e-12);
            prop_assert!(unbalance_from_pdh(&r, 2.5).abs() <= 2.5);
        }
    }
}
