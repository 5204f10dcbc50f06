//! Exact algebra of two-mode Gaussian states.
//!
//! Quadratures are normalised as `q = a + a†`, `p = i(a† - a)`, so the vacuum
//! has unit variance (shot-noise units). Covariance matrices are real 4×4 in
//! the ordering given by [`ModalBasis`]; the symplectic form is `J ⊕ J` with
//! `J = [[0, 1], [-1, 0]]`.

use std::f64::consts::SQRT_2;
use std::fmt;

use nalgebra::{Complex, Matrix2, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance on the physicality margin.
pub const DEFAULT_PHYSICALITY_TOL: f64 = 1e-8;

/// Relative tolerance used when checking covariance matrices for symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Physical knobs of a symmetric-displacement two-mode squeezed thermal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmstParams {
    /// Displacement amplitude of the symmetric displacement operator.
    pub alpha: Complex<f64>,
    /// Squeezed photons per mode, `sinh² r`.
    pub n_sq: f64,
    /// Total thermal photons `N₁ + N₂`.
    pub n_th: f64,
    /// Thermal fraction `N₁ / N_th` carried by the upper sideband.
    pub r_th: f64,
}

impl TmstParams {
    pub fn new(alpha: Complex<f64>, n_sq: f64, n_th: f64, r_th: f64) -> Result<Self> {
        let params = Self {
            alpha,
            n_sq,
            n_th,
            r_th,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn vacuum() -> Self {
        Self {
            alpha: Complex::new(0.0, 0.0),
            n_sq: 0.0,
            n_th: 0.0,
            r_th: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.re.is_finite() && self.alpha.im.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        if !(self.n_sq.is_finite() && self.n_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "n_sq must be finite and >= 0, got {}",
                self.n_sq
            )));
        }
        if !(self.n_th.is_finite() && self.n_th >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "n_th must be finite and >= 0, got {}",
                self.n_th
            )));
        }
        if !(0.0..=1.0).contains(&self.r_th) {
            return Err(Error::InvalidParameter(format!(
                "r_th must lie in [0, 1], got {}",
                self.r_th
            )));
        }
        Ok(())
    }

    /// Squeezing parameter `r` with `n_sq = sinh² r`.
    pub fn squeeze_parameter(&self) -> f64 {
        self.n_sq.sqrt().asinh()
    }
}

/// Mode ordering of a two-mode covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalBasis {
    /// `(q₊, p₊, q₋, p₋)`: upper and lower sideband.
    SidebandPm,
    /// `(q_s, p_s, q_a, p_a)`: symmetric and antisymmetric combinations.
    SymAntisym,
}

impl ModalBasis {
    pub fn other(self) -> Self {
        match self {
            Self::SidebandPm => Self::SymAntisym,
            Self::SymAntisym => Self::SidebandPm,
        }
    }
}

impl fmt::Display for ModalBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SidebandPm => "sideband_pm",
            Self::SymAntisym => "sym_antisym",
        })
    }
}

/// First moments plus covariance matrix, tagged with its modal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTwoModeState {
    first_moments: Vector4<f64>,
    cm: Matrix4<f64>,
    basis: ModalBasis,
}

impl GaussianTwoModeState {
    /// Builds a state after checking that `cm` is symmetric. Physicality is not
    /// enforced here; use [`check_physicality`].
    pub fn new(first_moments: Vector4<f64>, cm: Matrix4<f64>, basis: ModalBasis) -> Result<Self> {
        ensure_symmetric(&cm)?;
        Ok(Self {
            first_moments,
            cm,
            basis,
        })
    }

    pub fn vacuum(basis: ModalBasis) -> Self {
        Self {
            first_moments: Vector4::zeros(),
            cm: Matrix4::identity(),
            basis,
        }
    }

    pub fn first_moments(&self) -> &Vector4<f64> {
        &self.first_moments
    }

    pub fn cm(&self) -> &Matrix4<f64> {
        &self.cm
    }

    pub fn basis(&self) -> ModalBasis {
        self.basis
    }

    /// 2×2 block `(row, col)` of the covariance matrix, each index in `{0, 1}`.
    pub fn block(&self, row: usize, col: usize) -> Matrix2<f64> {
        block(&self.cm, row, col)
    }

    /// Returns the state expressed in `basis`.
    pub fn in_basis(&self, basis: ModalBasis) -> Self {
        if basis == self.basis {
            self.clone()
        } else {
            change_basis(self)
        }
    }

    /// Passes both modes through a beam splitter of transmissivity `eta`
    /// whose other port is vacuum.
    pub fn with_loss(&self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transmissivity must lie in (0, 1], got {eta}"
            )));
        }
        Ok(Self {
            first_moments: self.first_moments * eta.sqrt(),
            cm: self.cm * eta + Matrix4::identity() * (1.0 - eta),
            basis: self.basis,
        })
    }
}

pub(crate) fn block(cm: &Matrix4<f64>, row: usize, col: usize) -> Matrix2<f64> {
    cm.fixed_view::<2, 2>(2 * row, 2 * col).into_owned()
}

pub(crate) fn ensure_symmetric(cm: &Matrix4<f64>) -> Result<()> {
    let scale = cm.amax().max(1.0);
    let asym = (cm - cm.transpose()).amax();
    if !asym.is_finite() || asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// The two-mode symplectic form `Ω = J ⊕ J`.
pub fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

/// Ground-truth state in the sideband basis.
pub fn tmst_state(params: &TmstParams) -> Result<GaussianTwoModeState> {
    params.validate()?;
    let TmstParams {
        alpha,
        n_sq,
        n_th,
        r_th,
    } = *params;
    let base = 1.0 + 2.0 * n_sq * (1.0 + n_th);
    let a = base + 2.0 * r_th * n_th;
    let b = base + 2.0 * (1.0 - r_th) * n_th;
    let c = 2.0 * (1.0 + n_th) * (n_sq * (1.0 + n_sq)).sqrt();

    #[rustfmt::skip]
    let cm = Matrix4::new(
        a,   0.0, c,   0.0,
        0.0, a,   0.0, -c,
        c,   0.0, b,   0.0,
        0.0, -c,  0.0, b,
    );
    let (mq, mp) = (SQRT_2 * alpha.re, SQRT_2 * alpha.im);
    Ok(GaussianTwoModeState {
        first_moments: Vector4::new(mq, mp, mq, mp),
        cm,
        basis: ModalBasis::SidebandPm,
    })
}

/// `S` such that `r′ = S r_Ω`, mapping sideband quadratures to the
/// symmetric/antisymmetric ones.
pub fn mode_mixing_matrix() -> Matrix4<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let s = Matrix4::new(
        h,   0.0, h,   0.0,
        0.0, h,   0.0, h,
        0.0, -h,  0.0, h,
        h,   0.0, -h,  0.0,
    );
    s
}

/// Re-expresses the state in the other modal basis.
pub fn change_basis(state: &GaussianTwoModeState) -> GaussianTwoModeState {
    let s = mode_mixing_matrix();
    let (first_moments, cm) = match state.basis {
        ModalBasis::SidebandPm => (s * state.first_moments, s * state.cm * s.transpose()),
        ModalBasis::SymAntisym => (s.transpose() * state.first_moments, s.transpose() * state.cm * s),
    };
    GaussianTwoModeState {
        first_moments,
        cm: symmetrize(&cm),
        basis: state.basis.other(),
    }
}

pub(crate) fn symmetrize(cm: &Matrix4<f64>) -> Matrix4<f64> {
    (cm + cm.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physicality {
    pub passes: bool,
    /// Smallest eigenvalue of `σ + iΩ`.
    pub margin: f64,
}

/// Uncertainty-principle check `σ + iΩ ≥ 0`.
pub fn check_physicality(cm: &Matrix4<f64>, tol: f64) -> Result<Physicality> {
    ensure_symmetric(cm)?;
    let omega = symplectic_form();
    let hermitian = Matrix4::from_fn(|i, j| Complex::new(cm[(i, j)], omega[(i, j)]));
    let eigen = SymmetricEigen::new(hermitian);
    let margin = eigen.eigenvalues.min();
    Ok(Physicality {
        passes: margin >= -tol,
        margin,
    })
}

fn ensure_positive_2x2(cm2: &Matrix2<f64>) -> Result<f64> {
    let det = cm2.determinant();
    if !(det > 0.0 && cm2[(0, 0)] > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(det)
}

/// Purity `1/√det` of a single-mode block.
pub fn purity(cm2: &Matrix2<f64>) -> Result<f64> {
    Ok(1.0 / ensure_positive_2x2(cm2)?.sqrt())
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn eigenvalues_2x2(m: &Matrix2<f64>) -> (f64, f64) {
    let half_trace = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let radius = (0.25 * (m[(0, 0)] - m[(1, 1)]).powi(2) + off * off).sqrt();
    (half_trace - radius, half_trace + radius)
}

/// Noise reduction below shot noise in dB, from the smallest eigenvalue of a
/// single-mode block. Positive means squeezed.
pub fn noise_reduction_db(cm2: &Matrix2<f64>) -> Result<f64> {
    ensure_positive_2x2(cm2)?;
    let (min, _) = eigenvalues_2x2(cm2);
    Ok(-10.0 * min.log10())
}

fn ensure_positive_definite(cm: &Matrix4<f64>) -> Result<()> {
    ensure_symmetric(cm)?;
    nalgebra::Cholesky::new(symmetrize(cm))
        .map(|_| ())
        .ok_or(Error::NotPositiveDefinite)
}

// Discriminants this far below zero (relative) are treated as unphysical
// input rather than rounding.
const DISCRIMINANT_TOL: f64 = 1e-9;

fn seralian_roots(delta: f64, det: f64) -> Result<(f64, f64)> {
    let disc = delta * delta - 4.0 * det;
    if disc < -DISCRIMINANT_TOL * delta * delta.max(1.0) {
        return Err(Error::Unphysical { margin: disc });
    }
    let root = disc.max(0.0).sqrt();
    let lo = (0.5 * (delta - root)).max(0.0).sqrt();
    let hi = (0.5 * (delta + root)).max(0.0).sqrt();
    Ok((lo, hi))
}

/// Symplectic spectrum `(ν₁, ν₂)`, `ν₁ ≤ ν₂`.
pub fn symplectic_eigenvalues(cm: &Matrix4<f64>) -> Result<(f64, f64)> {
    ensure_positive_definite(cm)?;
    let delta = block(cm, 0, 0).determinant() + block(cm, 1, 1).determinant() + 2.0 * block(cm, 0, 1).determinant();
    seralian_roots(delta, cm.determinant())
}

/// Smallest symplectic eigenvalue of the partially transposed covariance
/// matrix. `cm` must be in the sideband basis; values below one certify
/// entanglement between the two sidebands.
pub fn ppt_min_symplectic_eigenvalue(cm: &Matrix4<f64>) -> Result<f64> {
    ensure_positive_definite(cm)?;
    let delta = block(cm, 0, 0).determinant() + block(cm, 1, 1).determinant() - 2.0 * block(cm, 0, 1).determinant();
    Ok(seralian_roots(delta, cm.determinant())?.0)
}

/// Mean photon number carried by the fluctuations, `¼ tr σ - 1`.
pub fn total_fluctuation_photons(cm: &Matrix4<f64>) -> f64 {
    0.25 * cm.trace() - 1.0
}

/// Mean photon numbers `(N₊, N₋)` of the two sidebands, displacement excluded.
pub fn sideband_energies(params: &TmstParams) -> (f64, f64) {
    let squeezed = params.n_sq * (1.0 + params.n_th);
    (
        squeezed + params.r_th * params.n_th,
        squeezed + (1.0 - params.r_th) * params.n_th,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(n_sq: f64, n_th: f64, r_th: f64) -> TmstParams {
        TmstParams::new(Complex::new(0.0, 0.0), n_sq, n_th, r_th).unwrap()
    }

    // Oracle: symplectic eigenvalues as moduli of the eigenvalues of Ω σ,
    // computed with a general (non-symmetric) eigen-solver.
    fn numeric_symplectic(cm: &Matrix4<f64>) -> (f64, f64) {
        let mut moduli: Vec<f64> = (symplectic_form() * cm)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect();
        moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (moduli[0], moduli[3])
    }

    fn partial_transpose(cm: &Matrix4<f64>) -> Matrix4<f64> {
        let flip = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0));
        flip * cm * flip
    }

    #[test]
    fn vacuum_params_give_identity() {
        let state = tmst_state(&TmstParams::vacuum()).unwrap();
        assert_eq!(*state.cm(), Matrix4::identity());
        assert_eq!(*state.first_moments(), Vector4::zeros());
    }

    #[test]
    fn tmst_entries() {
        let cm = *tmst_state(&params(1.0, 0.0, 0.5)).unwrap().cm();
        assert_abs_diff_eq!(cm[(0, 0)], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cm[(2, 2)], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cm[(0, 2)], 2.0 * SQRT_2, epsilon = 1e-14);
        assert_abs_diff_eq!(cm[(1, 3)], -2.0 * SQRT_2, epsilon = 1e-14);

        let cm = *tmst_state(&params(0.0, 1.0, 1.0)).unwrap().cm();
        assert_eq!(cm, Matrix4::from_diagonal(&Vector4::new(3.0, 3.0, 1.0, 1.0)));
    }

    #[test]
    fn tmst_first_moments() {
        let p = TmstParams::new(Complex::new(1.0, -0.5), 0.0, 0.0, 0.5).unwrap();
        let r = *tmst_state(&p).unwrap().first_moments();
        assert_abs_diff_eq!(
            r,
            Vector4::new(SQRT_2, -0.5 * SQRT_2, SQRT_2, -0.5 * SQRT_2),
            epsilon = 1e-15
        );
        let r_prime = *change_basis(&tmst_state(&p).unwrap()).first_moments();
        assert_abs_diff_eq!(r_prime, Vector4::new(2.0, -1.0, 0.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_params() {
        let zero = Complex::new(0.0, 0.0);
        assert!(TmstParams::new(zero, -0.1, 0.0, 0.5).is_err());
        assert!(TmstParams::new(zero, 0.0, -1.0, 0.5).is_err());
        assert!(TmstParams::new(zero, 0.0, 0.0, 1.5).is_err());
        assert!(TmstParams::new(zero, f64::NAN, 0.0, 0.5).is_err());
    }

    #[test]
    fn mixing_matrix_rows_and_action() {
        let s = mode_mixing_matrix();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(s.row(0).into_owned(), nalgebra::RowVector4::new(h, 0.0, h, 0.0));
        assert_abs_diff_eq!(s.transpose() * s, Matrix4::identity(), epsilon = 1e-14);
        let omega = symplectic_form();
        assert_abs_diff_eq!(s.transpose() * omega * s, omega, epsilon = 1e-14);

        let r = Vector4::new(0.3, -1.1, 0.7, 2.0);
        let (qp, pp, qm, pm) = (r[0], r[1], r[2], r[3]);
        let mixed = s * r;
        assert_abs_diff_eq!(mixed[0], (qp + qm) * h, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed[1], (pp + pm) * h, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed[2], (pm - pp) * h, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed[3], (qp - qm) * h, epsilon = 1e-15);
    }

    #[test]
    fn symplectic_form_properties() {
        let omega = symplectic_form();
        assert_eq!(omega.transpose(), -omega);
        assert_eq!(omega * omega, -Matrix4::identity());
    }

    #[test]
    fn unbalanced_thermal_in_sym_antisym_basis() {
        let state = change_basis(&tmst_state(&params(0.0, 1.0, 1.0)).unwrap());
        assert_eq!(state.basis(), ModalBasis::SymAntisym);
        assert_abs_diff_eq!(state.block(0, 0), Matrix2::identity() * 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(state.block(1, 1), Matrix2::identity() * 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(state.block(0, 1), Matrix2::new(0.0, 1.0, -1.0, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn symmetric_tmst_in_sym_antisym_basis() {
        let cm = tmst_state(&params(1.0, 0.0, 0.5)).unwrap();
        let (a, c) = (cm.cm()[(0, 0)], cm.cm()[(0, 2)]);
        let mixed = change_basis(&cm);
        let diag = Matrix2::new(a + c, 0.0, 0.0, a - c);
        assert_abs_diff_eq!(mixed.block(0, 0), diag, epsilon = 1e-13);
        assert_abs_diff_eq!(mixed.block(1, 1), diag, epsilon = 1e-13);
        assert_abs_diff_eq!(mixed.block(0, 1), Matrix2::zeros(), epsilon = 1e-13);
    }

    #[test]
    fn physicality_examples() {
        let vac = check_physicality(&Matrix4::identity(), DEFAULT_PHYSICALITY_TOL).unwrap();
        assert!(vac.passes);
        assert_abs_diff_eq!(vac.margin, 0.0, epsilon = 1e-14);

        let half = check_physicality(&(Matrix4::identity() * 0.5), DEFAULT_PHYSICALITY_TOL).unwrap();
        assert!(!half.passes);
        assert_abs_diff_eq!(half.margin, -0.5, epsilon = 1e-14);

        let squeezed = tmst_state(&params(0.320, 0.471, 0.5)).unwrap();
        assert!(
            check_physicality(squeezed.cm(), DEFAULT_PHYSICALITY_TOL)
                .unwrap()
                .passes
        );

        let mut skew = Matrix4::identity();
        skew[(0, 1)] = 0.1;
        assert!(matches!(check_physicality(&skew, 1e-8), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn purity_and_db_examples() {
        assert_eq!(purity(&Matrix2::identity()).unwrap(), 1.0);
        assert_abs_diff_eq!(purity(&(Matrix2::identity() * 2.0)).unwrap(), 0.5, epsilon = 1e-15);
        assert!(purity(&Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());

        assert_eq!(noise_reduction_db(&Matrix2::identity()).unwrap(), 0.0);
        assert_abs_diff_eq!(
            noise_reduction_db(&Matrix2::new(2.0, 0.0, 0.0, 0.5)).unwrap(),
            3.010299956639812,
            epsilon = 1e-12
        );
        assert!(noise_reduction_db(&Matrix2::zeros()).is_err());
    }

    #[test]
    fn symplectic_eigenvalue_examples() {
        let (a, b) = symplectic_eigenvalues(&Matrix4::identity()).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-14);

        let pure = tmst_state(&params(1.0, 0.0, 0.5)).unwrap();
        let (a, b) = symplectic_eigenvalues(pure.cm()).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-7);

        let thermal = tmst_state(&params(0.0, 1.0, 1.0)).unwrap();
        let (a, b) = symplectic_eigenvalues(thermal.cm()).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 3.0, epsilon = 1e-14);

        assert!(matches!(
            symplectic_eigenvalues(&(-Matrix4::identity())),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn ppt_examples() {
        assert_abs_diff_eq!(
            ppt_min_symplectic_eigenvalue(&Matrix4::identity()).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let pure = tmst_state(&params(1.0, 0.0, 0.5)).unwrap();
        let expected = (-2.0 * 1f64.asinh()).exp();
        assert_abs_diff_eq!(
            ppt_min_symplectic_eigenvalue(pure.cm()).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expected, 0.1715728752538097, epsilon = 1e-15);
    }

    #[test]
    fn photon_number_examples() {
        assert_eq!(total_fluctuation_photons(&Matrix4::identity()), 0.0);
        let cm = tmst_state(&params(1.0, 0.0, 0.5)).unwrap();
        assert_abs_diff_eq!(total_fluctuation_photons(cm.cm()), 2.0, epsilon = 1e-14);
        let cm = tmst_state(&params(0.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(total_fluctuation_photons(cm.cm()), 1.0, epsilon = 1e-14);

        assert_eq!(sideband_energies(&TmstParams::vacuum()), (0.0, 0.0));
        assert_eq!(sideband_energies(&params(0.0, 1.0, 1.0)), (1.0, 0.0));
        let (np, nm) = sideband_energies(&params(0.320, 0.471, 0.5));
        assert_abs_diff_eq!(np, 0.70622, epsilon = 1e-12);
        assert_abs_diff_eq!(nm, 0.70622, epsilon = 1e-12);
    }

    #[test]
    fn loss_keeps_vacuum_fixed() {
        let vac = GaussianTwoModeState::vacuum(ModalBasis::SymAntisym)
            .with_loss(0.7)
            .unwrap();
        assert_abs_diff_eq!(*vac.cm(), Matrix4::identity(), epsilon = 1e-15);
        assert!(vac.with_loss(0.0).is_err());
    }

    fn tmst_strategy() -> impl Strategy<Value = TmstParams> {
        (0.0..5.0f64, 0.0..5.0f64, 0.0..=1.0f64, -2.0..2.0f64, -2.0..2.0f64)
            .prop_map(|(n_sq, n_th, r_th, re, im)| TmstParams::new(Complex::new(re, im), n_sq, n_th, r_th).unwrap())
    }

    // Random symplectic perturbation of a tmst state: local phase rotations
    // and single-mode squeezers keep the state physical but break its
    // symmetric structure.
    fn local_symplectic(phi1: f64, phi2: f64, r1: f64, r2: f64) -> Matrix4<f64> {
        let single = |phi: f64, r: f64| {
            let rot = Matrix2::new(phi.cos(), phi.sin(), -phi.sin(), phi.cos());
            rot * Matrix2::new(r.exp(), 0.0, 0.0, (-r).exp())
        };
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&single(phi1, r1));
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&single(phi2, r2));
        m
    }

    proptest! {
        #[test]
        fn basis_round_trip(p in tmst_strategy(), phi1 in 0.0..6.3f64, phi2 in 0.0..6.3f64, r1 in -0.5..0.5f64, r2 in -0.5..0.5f64) {
            let base = tmst_state(&p).unwrap();
            let l = local_symplectic(phi1, phi2, r1, r2);
            let state = GaussianTwoModeState::new(l * base.first_moments(), l * base.cm() * l.transpose(), ModalBasis::SidebandPm).unwrap();
            let back = change_basis(&change_basis(&state));
            let scale = state.cm().amax();
            prop_assert!((back.cm() - state.cm()).amax() <= 1e-12 * scale);
            prop_assert!((back.first_moments() - state.first_moments()).amax() <= 1e-12 * state.first_moments().amax().max(1.0));
            prop_assert_eq!(back.basis(), ModalBasis::SidebandPm);

            let (a0, b0) = symplectic_eigenvalues(state.cm()).unwrap();
            let (a1, b1) = symplectic_eigenvalues(change_basis(&state).cm()).unwrap();
            prop_assert!((a0 - a1).abs() <= 1e-10 * b0 && (b0 - b1).abs() <= 1e-10 * b0);
            let t0 = state.cm().trace();
            prop_assert!((t0 - change_basis(&state).cm().trace()).abs() <= 1e-12 * t0);
        }

        #[test]
        fn photons_match_sideband_energies(p in tmst_strategy()) {
            let state = tmst_state(&p).unwrap();
            let (np, nm) = sideband_energies(&p);
            prop_assert!((total_fluctuation_photons(state.cm()) - (np + nm)).abs() < 1e-10);
        }

        #[test]
        fn measured_cm_block_structure(p in tmst_strategy()) {
            let mixed = change_basis(&tmst_state(&p).unwrap());
            let (np, nm) = sideband_energies(&p);
            let off = mixed.block(0, 1);
            prop_assert!((off[(0, 1)] - (np - nm)).abs() < 1e-10);
            prop_assert!((off[(1, 0)] + (np - nm)).abs() < 1e-10);
            prop_assert!(off[(0, 0)].abs() < 1e-10 && off[(1, 1)].abs() < 1e-10);
        }

        #[test]
        fn tmst_is_physical(p in tmst_strategy()) {
            let state = tmst_state(&p).unwrap();
            let margin = check_physicality(state.cm(), DEFAULT_PHYSICALITY_TOL).unwrap().margin;
            prop_assert!(margin >= -1e-9);
        }

        #[test]
        fn closed_forms_match_numeric_oracle(p in tmst_strategy(), phi1 in 0.0..6.3f64, phi2 in 0.0..6.3f64, r1 in -0.5..0.5f64, r2 in -0.5..0.5f64) {
            let l = local_symplectic(phi1, phi2, r1, r2);
            let cm = l * tmst_state(&p).unwrap().cm() * l.transpose();
            let cm = symmetrize(&cm);
            let (a, b) = symplectic_eigenvalues(&cm).unwrap();
            let (oa, ob) = numeric_symplectic(&cm);
            prop_assert!((a - oa).abs() < 1e-6 * ob && (b - ob).abs() < 1e-6 * ob);
            let ppt = ppt_min_symplectic_eigenvalue(&cm).unwrap();
            let (opt, _) = numeric_symplectic(&partial_transpose(&cm));
            prop_assert!((ppt - opt).abs() < 1e-6 * ob);
        }

        #[test]
        fn product_states_are_separable(v1 in 1.0..6.0f64, v2 in 1.0..6.0f64, phi1 in 0.0..6.3f64, phi2 in 0.0..6.3f64, r1 in -1.0..1.0f64, r2 in -1.0..1.0f64) {
            let thermal = Matrix4::from_diagonal(&Vector4::new(v1, v1, v2, v2));
            let l = local_symplectic(phi1, phi2, r1, r2);
            let cm = symmetrize(&(l * thermal * l.transpose()));
            prop_assert!(ppt_min_symplectic_eigenvalue(&cm).unwrap() >= 1.0 - 1e-9);
        }
    }
}
