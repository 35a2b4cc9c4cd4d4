//! Dipole-dipole coupling coefficients and the derived spectral constants of
//! the symmetric three-emitter array.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::geometry::Geometry;
use crate::{Error, Result};

/// Smallest γ-matrix eigenvalue still treated as numerical noise.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Tolerance on |Δ₁₂ − Δ₂₃| for the closed-form spectral constants.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Complex coupling Ξ for dimensionless separation `xi` and dipole angle
/// `alpha` to the pair axis, in units of γ.
pub fn xi_coefficient(xi: f64, alpha: f64) -> Result<Complex64> {
    let c = alpha.cos();
    xi_coefficient_cos2(xi, c * c)
}

/// Same as [`xi_coefficient`] but parametrised by cos² of the angle between
/// the dipole and the pair axis.
pub fn xi_coefficient_cos2(xi: f64, cos2: f64) -> Result<Complex64> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(Error::NonPositiveSeparation(xi));
    }
    let sin2 = 1.0 - cos2;
    let q = 1.0 - 3.0 * cos2;
    let (s, c) = xi.sin_cos();
    let x3 = xi.powi(3);
    let re = -0.75 * (xi * xi * sin2 * c - q * (c + xi * s)) / x3;
    // sin ξ − ξ cos ξ ~ ξ³/3 cancels catastrophically at small ξ
    let im = -0.75 * (xi * xi * sin2 * s - q * sin_minus_xcos(xi)) / x3;
    Ok(Complex64::new(re, im))
}

fn sin_minus_xcos(x: f64) -> f64 {
    if x > 0.5 {
        return x.sin() - x * x.cos();
    }
    // Σ_{k≥1} (−1)^{k+1} 2k x^{2k+1} / (2k+1)!
    let x2 = x * x;
    let mut term = x * x2 / 6.0; // x³/3!
    let mut sum = 0.0;
    for k in 1..20 {
        let contrib = 2.0 * k as f64 * term;
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() {
            break;
        }
        let kk = 2 * k + 2;
        term *= -x2 / (kk as f64 * (kk + 1) as f64);
    }
    sum
}

/// Coherent (Δ) and dissipative (γ) coupling matrices of an array.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSet {
    /// Real symmetric, zero diagonal.
    pub delta: DMatrix<f64>,
    /// Real symmetric, unit diagonal, positive semidefinite.
    pub gammas: DMatrix<f64>,
}

impl CouplingSet {
    pub fn n(&self) -> usize {
        self.delta.nrows()
    }

    /// Builds a set from explicit matrices, checking shape, symmetry and
    /// positivity of the relaxation matrix.
    pub fn from_matrices(delta: DMatrix<f64>, gammas: DMatrix<f64>) -> Result<Self> {
        let n = delta.nrows();
        if delta.shape() != (n, n) || gammas.shape() != (n, n) || n == 0 {
            return Err(Error::InvalidParameter("coupling matrices must be square and equal size".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if delta[(i, j)] != delta[(j, i)] || gammas[(i, j)] != gammas[(j, i)] {
                    return Err(Error::InvalidParameter("coupling matrices must be symmetric".into()));
                }
            }
        }
        let set = CouplingSet { delta, gammas };
        let min = set.gamma_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite(min));
        }
        Ok(set)
    }

    /// Uncoupled emitters: Δ = 0, γ = identity.
    pub fn independent(n: usize) -> Self {
        CouplingSet { delta: DMatrix::zeros(n, n), gammas: DMatrix::identity(n, n) }
    }

    /// ξ → 0 limit of the relaxation matrix (all γᵢⱼ = γ) with the divergent
    /// coherent shifts dropped.
    pub fn dicke(n: usize) -> Self {
        CouplingSet { delta: DMatrix::zeros(n, n), gammas: DMatrix::from_element(n, n, 1.0) }
    }

    /// Eigen-decomposition of the relaxation matrix, ascending.
    pub fn gamma_eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        self.gammas.clone().symmetric_eigen()
    }

    pub fn gamma_eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.gamma_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Ξᵢⱼ = Δᵢⱼ − (i/2)γᵢⱼ as a complex matrix; the diagonal is −i/2.
    pub fn xi_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n(), self.n(), |i, j| Complex64::new(self.delta[(i, j)], -0.5 * self.gammas[(i, j)]))
    }
}

/// Coupling matrices over all emitter pairs of `g`.
pub fn coupling_matrices(g: &Geometry) -> Result<CouplingSet> {
    let n = g.n();
    let mut delta = DMatrix::zeros(n, n);
    let mut gammas = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let xi = xi_coefficient_cos2(g.xi(i, j), g.cos2_pair(i, j))?;
            delta[(i, j)] = xi.re;
            delta[(j, i)] = xi.re;
            gammas[(i, j)] = -2.0 * xi.im;
            gammas[(j, i)] = -2.0 * xi.im;
        }
    }
    CouplingSet::from_matrices(delta, gammas)
}

/// Closed-form constants of the symmetric three-emitter array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralParams {
    pub d12: f64,
    pub d13: f64,
    pub gamma12: f64,
    pub gamma13: f64,
    /// √(8Δ₁₂² + Δ₁₃²)
    pub omega: f64,
    /// Ω − Δ₁₃
    pub kappa: f64,
    /// Ω − 3Δ₁₃
    pub eta: f64,
    /// −Δ₁₃ + ½(Δ₁₃ + Ω)
    pub delta_plus: f64,
    /// −Δ₁₃ − ½(Δ₁₃ + Ω)
    pub delta_minus: f64,
}

impl SpectralParams {
    pub fn from_couplings(d12: f64, d13: f64, gamma12: f64, gamma13: f64) -> Self {
        let omega = (8.0 * d12 * d12 + d13 * d13).sqrt();
        SpectralParams {
            d12,
            d13,
            gamma12,
            gamma13,
            omega,
            kappa: omega - d13,
            eta: omega - 3.0 * d13,
            delta_plus: -d13 + 0.5 * (d13 + omega),
            delta_minus: -d13 - 0.5 * (d13 + omega),
        }
    }

    /// Single-excitation energies, ascending: the lowest (b), the
    /// antisymmetric outer-pair state, and the highest.
    pub fn single_excitation_energies(&self) -> [f64; 3] {
        let mut e = [0.5 * (self.d13 - self.omega), -self.d13, 0.5 * (self.d13 + self.omega)];
        e.sort_by(f64::total_cmp);
        e
    }

    /// Drive detuning resonant with the ground to lowest single-excitation
    /// transition.
    pub fn prep_frequency(&self) -> f64 {
        0.5 * (self.d13 - self.omega)
    }

    /// Second Raman tone for a given first-tone detuning `omega_delta`.
    pub fn rotation_nu_frequency(&self, omega_delta: f64) -> f64 {
        0.5 * (3.0 * self.d13 - self.omega) + omega_delta
    }

    /// Detuning resonant with the c to g readout transition.
    pub fn readout_c_frequency(&self) -> f64 {
        0.5 * (3.0 * self.d13 + self.omega)
    }

    /// Detuning resonant with the b to g transition.
    pub fn readout_b_frequency(&self) -> f64 {
        self.omega
    }
}

pub fn spectral_params(c: &CouplingSet) -> Result<SpectralParams> {
    if c.n() != 3 {
        return Err(Error::InvalidParameter(format!("closed forms need 3 emitters, got {}", c.n())));
    }
    let asym = (c.delta[(0, 1)] - c.delta[(1, 2)]).abs();
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::AsymmetricArray(asym));
    }
    Ok(SpectralParams::from_couplings(c.delta[(0, 1)], c.delta[(0, 2)], c.gammas[(0, 1)], c.gammas[(0, 2)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    // Independent evaluation: expand e^{iξ}(A + iB) into real and imaginary
    // parts by hand instead of using complex arithmetic.
    fn oracle(xi: f64, alpha: f64) -> (f64, f64) {
        let c2 = alpha.cos().powi(2);
        let s2 = alpha.sin().powi(2);
        let a = xi * xi * s2 - (1.0 - 3.0 * c2);
        let b = xi * (1.0 - 3.0 * c2);
        let pref = -0.75 / xi.powi(3);
        let re = pref * (xi.cos() * a - xi.sin() * b);
        let im = pref * (xi.sin() * a + xi.cos() * b);
        (re, im)
    }

    #[test]
    fn matches_independent_expansion() {
        for &(xi, alpha) in &[(0.5, 0.0), (0.15, FRAC_PI_2), (1.0, 0.3), (2.5, 1.1)] {
            let z = xi_coefficient(xi, alpha).unwrap();
            let (re, im) = oracle(xi, alpha);
            assert!((z.re - re).abs() < 1e-12 * re.abs().max(1.0));
            assert!((z.im - im).abs() < 1e-12 * im.abs().max(1.0));
        }
    }

    #[test]
    fn high_precision_reference_value() {
        // Ξ(0.5, 0) evaluated with 50-digit arithmetic.
        let z = xi_coefficient(0.5, 0.0).unwrap();
        assert!((z.re - (-13.407_543_974_309_690_6)).abs() < 1e-12, "{}", z.re);
        assert!((z.im - (-0.487_611_091_908_199_7)).abs() < 1e-13, "{}", z.im);
    }

    #[test]
    fn small_argument_series_matches_direct_form() {
        for &x in &[0.5f64, 0.3, 0.1] {
            let direct = x.sin() - x * x.cos();
            assert!((sin_minus_xcos(x) - direct).abs() < 1e-15, "{x}");
        }
        let x: f64 = 1e-3;
        let series = x.powi(3) / 3.0 - x.powi(5) / 30.0 + x.powi(7) / 840.0;
        assert!((sin_minus_xcos(x) / series - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dicke_limit_gamma() {
        for &alpha in &[0.0, 0.7, FRAC_PI_2] {
            let z = xi_coefficient(1e-3, alpha).unwrap();
            assert!((-2.0 * z.im - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn far_field_decay() {
        let a = xi_coefficient(1e3, FRAC_PI_2).unwrap().norm();
        let b = xi_coefficient(1e4, FRAC_PI_2).unwrap().norm();
        assert!((a / b - 10.0).abs() < 0.1);
        assert!(xi_coefficient(0.0, 0.0).is_err());
        assert!(xi_coefficient(-1.0, 0.0).is_err());
    }

    #[test]
    fn symmetric_array_couplings() {
        let g = Geometry::linear(0.5, 3, 0.0).unwrap();
        let c = coupling_matrices(&g).unwrap();
        assert!((c.delta[(0, 1)] - c.delta[(1, 2)]).abs() < 1e-12);
        assert!((c.gammas[(0, 1)] - c.gammas[(1, 2)]).abs() < 1e-12);
        assert_eq!(c.delta, c.delta.transpose());
        assert_eq!(c.gammas, c.gammas.transpose());
        for i in 0..3 {
            assert_eq!(c.delta[(i, i)], 0.0);
            assert_eq!(c.gammas[(i, i)], 1.0);
        }
    }

    #[test]
    fn rotation_geometry_is_psd() {
        let g = Geometry::linear(0.15, 3, FRAC_PI_2).unwrap();
        let c = coupling_matrices(&g).unwrap();
        assert!(c.gamma_eigenvalues().iter().all(|&l| l >= -PSD_TOLERANCE));
        let sp = spectral_params(&c).unwrap();
        assert!(sp.omega > 100.0);
    }

    #[test]
    fn dicke_limit_matrices() {
        let c = coupling_matrices(&Geometry::linear(1e-3, 3, 0.0).unwrap()).unwrap();
        assert!(c.gammas.iter().all(|g| (g - 1.0).abs() < 1e-3));
        let ev = c.gamma_eigenvalues();
        assert!(ev[0].abs() < 1e-3 && ev[1].abs() < 1e-3 && (ev[2] - 3.0).abs() < 1e-3, "{ev:?}");
    }

    #[test]
    fn zero_nearest_neighbour_shift() {
        let sp = SpectralParams::from_couplings(0.0, 2.0, 0.0, 0.0);
        assert_eq!(sp.omega, 2.0);
        assert_eq!(sp.delta_plus, 0.0);
        assert_eq!(sp.delta_minus, -4.0);
        assert_eq!(sp.kappa, 0.0);
    }

    #[test]
    fn closed_forms_match_single_excitation_block() {
        for &(xi, alpha) in &[(0.5, 0.0), (0.15, FRAC_PI_2), (0.3, 0.0), (0.05, 0.4)] {
            let c = coupling_matrices(&Geometry::linear(xi, 3, alpha).unwrap()).unwrap();
            let sp = spectral_params(&c).unwrap();
            // The Hermitian single-excitation block is Δ itself.
            let mut ev: Vec<f64> = c.delta.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let e = sp.single_excitation_energies();
            let scale = sp.omega;
            for k in 0..3 {
                assert!((ev[k] - e[k]).abs() < 1e-9 * scale, "{ev:?} vs {e:?}");
            }
            assert!((sp.delta_plus + ev[0]).abs() < 1e-9 * scale);
            assert!((sp.delta_minus - (-sp.d13 - e[2])).abs() < 1e-9 * scale);
            assert!((ev[2] - ev[0] - sp.omega).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn asymmetric_array_rejected() {
        let g = Geometry::new(vec![[-0.1, 0.0, 0.0], [0.0, 0.0, 0.0], [0.15, 0.0, 0.0]], 0.0).unwrap();
        let c = coupling_matrices(&g).unwrap();
        assert!(matches!(spectral_params(&c), Err(Error::AsymmetricArray(_))));
    }

    proptest! {
        #[test]
        fn couplings_symmetric_and_psd(xi in 0.02f64..2.0, alpha in 0.0f64..3.2) {
            let c = coupling_matrices(&Geometry::linear(xi, 3, alpha).unwrap()).unwrap();
            prop_assert!(c.gamma_eigenvalues()[0] >= -PSD_TOLERANCE);
            let sp = spectral_params(&c).unwrap();
            prop_assert!(sp.omega >= sp.d13.abs());
            prop_assert!(sp.kappa >= 0.0);
        }
    }
}
