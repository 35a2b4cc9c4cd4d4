//! Emitter placement, dipole orientation and positional disorder.
//!
//! Lengths are measured in units of the resonant wavelength λ₀, so the
//! resonant wavenumber is k₀ = 2π and the dimensionless separation of a pair
//! is ξᵢⱼ = k₀ |rᵢ − rⱼ|. The array axis is x; the common dipole direction
//! lies in the x–z plane at angle α to that axis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::{Error, Result};

/// Resonant wavenumber when lengths are expressed in λ₀.
pub const K0: f64 = TAU;

/// Separations below this (in λ₀) count as coincident emitters.
pub const MIN_SEPARATION: f64 = 1e-6;

/// Largest array the dense Hilbert-space machinery is sized for.
pub const MAX_EMITTERS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    positions: Vec<[f64; 3]>,
    alpha: f64,
    k0: f64,
}

impl Geometry {
    pub fn new(positions: Vec<[f64; 3]>, alpha: f64) -> Result<Self> {
        Self::with_wavenumber(positions, alpha, K0)
    }

    pub fn with_wavenumber(positions: Vec<[f64; 3]>, alpha: f64, k0: f64) -> Result<Self> {
        if positions.is_empty() || positions.len() > MAX_EMITTERS {
            return Err(Error::Geometry(format!(
                "emitter count {} outside 1..={MAX_EMITTERS}",
                positions.len()
            )));
        }
        if !alpha.is_finite() || !(k0.is_finite() && k0 > 0.0) {
            return Err(Error::Geometry("alpha and k0 must be finite, k0 > 0".into()));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Geometry("positions must be finite".into()));
        }
        let g = Geometry { positions, alpha, k0 };
        for i in 0..g.n() {
            for j in (i + 1)..g.n() {
                if g.separation(i, j) < MIN_SEPARATION {
                    return Err(Error::Geometry(format!("emitters {} and {} coincide", i + 1, j + 1)));
                }
            }
        }
        Ok(g)
    }

    /// Equally spaced collinear array centred on the origin whose nearest
    /// neighbours sit at dimensionless separation `xi12`.
    pub fn linear(xi12: f64, n: usize, alpha: f64) -> Result<Self> {
        linear_array(xi12 / K0, n, alpha)
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// Unit vector of the common dipole moment.
    pub fn dipole_direction(&self) -> [f64; 3] {
        [self.alpha.cos(), 0.0, self.alpha.sin()]
    }

    fn displacement(&self, i: usize, j: usize) -> [f64; 3] {
        let (a, b) = (self.positions[i], self.positions[j]);
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    /// Distance between emitters `i` and `j` in λ₀.
    pub fn separation(&self, i: usize, j: usize) -> f64 {
        let d = self.displacement(i, j);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn xi(&self, i: usize, j: usize) -> f64 {
        self.k0 * self.separation(i, j)
    }

    /// cos² of the angle between the dipole direction and the pair axis.
    pub fn cos2_pair(&self, i: usize, j: usize) -> f64 {
        let d = self.displacement(i, j);
        let r = self.separation(i, j);
        let p = self.dipole_direction();
        let c = (d[0] * p[0] + d[1] * p[1] + d[2] * p[2]) / r;
        c * c
    }

    /// Symmetric matrix of ξᵢⱼ with zero diagonal.
    pub fn xi_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { self.xi(i, j) }).collect())
            .collect()
    }

    /// Phase k₀ xᵢ accumulated by a plane wave running along the array axis.
    pub fn axis_phases(&self) -> Vec<f64> {
        self.positions.iter().map(|p| self.k0 * p[0]).collect()
    }

    pub fn translated(&self, shift: [f64; 3]) -> Geometry {
        let positions = self
            .positions
            .iter()
            .map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]])
            .collect();
        Geometry { positions, ..self.clone() }
    }

    /// True when the emitters are no longer ordered along the axis the way
    /// they were listed.
    pub fn is_reordered(&self) -> bool {
        self.positions.windows(2).any(|w| w[1][0] <= w[0][0])
    }
}

/// Collinear array along x with spacing `r` (λ₀), centred on the origin.
/// For three emitters the positions are exactly −r, 0, +r.
pub fn linear_array(r: f64, n: usize, alpha: f64) -> Result<Geometry> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Geometry(format!("spacing must be positive, got {r}")));
    }
    if !(3..=4).contains(&n) {
        return Err(Error::Geometry(format!("linear arrays support 3 or 4 emitters, got {n}")));
    }
    let centre = (n as f64 - 1.0) / 2.0;
    let positions = (0..n).map(|i| [(i as f64 - centre) * r, 0.0, 0.0]).collect();
    Geometry::new(positions, alpha)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderMode {
    /// Independent displacement along x, y and z.
    #[default]
    Isotropic,
    /// Displacement along the array axis only.
    AlongAxis,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    /// Per-axis variance of the Gaussian displacement, in λ₀ units.
    pub variance: f64,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: DisorderMode,
}

impl DisorderSpec {
    pub fn new(variance: f64, samples: usize, seed: u64) -> Self {
        DisorderSpec { variance, samples, seed, mode: DisorderMode::Isotropic }
    }

    fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance >= 0.0) {
            return Err(Error::InvalidParameter(format!("variance {} must be >= 0", self.variance)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("at least one disorder sample required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DisorderedSet {
    pub geometries: Vec<Geometry>,
    /// Draws discarded because two emitters landed within [`MIN_SEPARATION`].
    pub redraws: usize,
}

/// RNG for sample `index` of a disorder run. Each sample owns its own
/// ChaCha stream so samples can be generated in any order.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws `spec.samples` perturbed copies of `g`. Every displaced coordinate
/// is the nominal one plus a N(0, variance) draw; α is kept.
pub fn sample_disorder(g: &Geometry, spec: &DisorderSpec) -> Result<DisorderedSet> {
    spec.validate()?;
    let normal = Normal::new(0.0, spec.variance.sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut redraws = 0;
    let mut geometries = Vec::with_capacity(spec.samples);
    for index in 0..spec.samples {
        let mut rng = sample_rng(spec.seed, index);
        loop {
            let positions: Vec<[f64; 3]> = g
                .positions
                .iter()
                .map(|p| match spec.mode {
                    DisorderMode::Isotropic => [
                        p[0] + normal.sample(&mut rng),
                        p[1] + normal.sample(&mut rng),
                        p[2] + normal.sample(&mut rng),
                    ],
                    DisorderMode::AlongAxis => [p[0] + normal.sample(&mut rng), p[1], p[2]],
                })
                .collect();
            match Geometry::with_wavenumber(positions, g.alpha, g.k0) {
                Ok(sample) => {
                    geometries.push(sample);
                    break;
                }
                Err(_) => redraws += 1,
            }
        }
    }
    Ok(DisorderedSet { geometries, redraws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_emitter_array_is_symmetric() {
        let g = Geometry::linear(0.5, 3, 0.0).unwrap();
        assert!((g.xi(0, 1) - 0.5).abs() < 1e-14);
        assert!((g.xi(0, 2) - 1.0).abs() < 1e-14);
        assert!((g.xi(1, 2) - g.xi(0, 1)).abs() < 1e-14);
        assert_eq!(g.positions()[1], [0.0, 0.0, 0.0]);
        let r = g.positions()[2][0];
        assert_eq!(g.positions()[0][0], -r);
    }

    #[test]
    fn rotation_geometry() {
        let g = Geometry::linear(0.15, 3, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((g.xi(0, 1) - 0.15).abs() < 1e-14);
        assert!(g.cos2_pair(0, 1) < 1e-30);
    }

    #[test]
    fn four_emitter_array_has_equal_spacing() {
        let g = linear_array(0.02, 4, 0.0).unwrap();
        for i in 0..3 {
            assert!((g.separation(i, i + 1) - 0.02).abs() < 1e-15);
        }
        let sum: f64 = g.positions().iter().map(|p| p[0]).sum();
        assert!(sum.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arrays() {
        assert!(linear_array(0.0, 3, 0.0).is_err());
        assert!(linear_array(-1.0, 3, 0.0).is_err());
        assert!(linear_array(0.1, 5, 0.0).is_err());
        assert!(linear_array(0.1, 2, 0.0).is_err());
        assert!(Geometry::new(vec![[0.0; 3], [0.0; 3]], 0.0).is_err());
    }

    #[test]
    fn zero_variance_reproduces_nominal() {
        let g = Geometry::linear(0.5, 3, 0.0).unwrap();
        let set = sample_disorder(&g, &DisorderSpec::new(0.0, 7, 11)).unwrap();
        assert_eq!(set.geometries.len(), 7);
        for s in &set.geometries {
            for (a, b) in s.positions().iter().zip(g.positions()) {
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn disorder_is_seed_reproducible() {
        let g = Geometry::linear(0.5, 3, 0.0).unwrap();
        let spec = DisorderSpec::new(0.005, 100, 42);
        let a = sample_disorder(&g, &spec).unwrap();
        let b = sample_disorder(&g, &spec).unwrap();
        assert_eq!(a.geometries, b.geometries);
        let c = sample_disorder(&g, &DisorderSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.geometries, c.geometries);
    }

    #[test]
    fn along_axis_mode_only_moves_x() {
        let g = Geometry::linear(0.5, 3, 0.0).unwrap();
        let spec = DisorderSpec { mode: DisorderMode::AlongAxis, ..DisorderSpec::new(1e-4, 5, 1) };
        for s in sample_disorder(&g, &spec).unwrap().geometries {
            assert!(s.positions().iter().all(|p| p[1] == 0.0 && p[2] == 0.0));
        }
    }

    #[test]
    fn displacement_statistics_match_variance() {
        let g = Geometry::linear(0.5, 3, 0.0).unwrap();
        let v = 0.003;
        let set = sample_disorder(&g, &DisorderSpec::new(v, 4000, 9)).unwrap();
        let d: Vec<f64> = set
            .geometries
            .iter()
            .flat_map(|s| {
                s.positions()
                    .iter()
                    .zip(g.positions())
                    .flat_map(|(a, b)| (0..3).map(move |k| a[k] - b[k]))
                    .collect::<Vec<_>>()
            })
            .collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // standard error of a Gaussian sample variance is v sqrt(2/(n-1))
        let se = v * (2.0 / (n - 1.0)).sqrt();
        assert!(d.len() >= 10_000);
        assert!((var - v).abs() < 3.0 * se, "var {var} vs {v} (se {se})");
        assert!(mean.abs() < 3.0 * (v / n).sqrt());
    }

    proptest! {
        #[test]
        fn xi_matrix_symmetric_and_translation_invariant(
            xi in 0.01f64..2.0,
            alpha in 0.0f64..3.2,
            sx in -5.0f64..5.0, sy in -5.0f64..5.0, sz in -5.0f64..5.0,
        ) {
            let g = Geometry::linear(xi, 3, alpha).unwrap();
            let m = g.xi_matrix();
            let t = g.translated([sx, sy, sz]).xi_matrix();
            for i in 0..3 {
                prop_assert_eq!(m[i][i], 0.0);
                for j in 0..3 {
                    prop_assert_eq!(m[i][j], m[j][i]);
                    prop_assert!((m[i][j] - t[i][j]).abs() < 1e-9);
                }
            }
        }
    }
}
