//! Product and collective bases of N two-level emitters.
//!
//! Basis index convention: qubit 1 is the most significant bit, so for three
//! emitters index 1 is |001⟩ (qubit 3 excited) and index 4 is |100⟩.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::coupling::CouplingSet;
use crate::linalg;
use crate::{Error, Result};

type C = Complex64;

/// Threshold on max |⟨Rᵢ|Rⱼ⟩| (i ≠ j) above which populations use the
/// bi-orthogonal left/right pairing.
pub const NON_ORTHOGONALITY_THRESHOLD: f64 = 1e-6;

/// Whether the anti-Hermitian (decay) part of the free Hamiltonian is kept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decay {
    Include,
    /// Coherent part only; used for the "no photon emission" figures.
    #[default]
    Neglect,
}

pub fn dim(n: usize) -> usize {
    1 << n
}

/// Bit mask of qubit `i` (0-based) in a basis index.
pub fn qubit_mask(i: usize, n: usize) -> usize {
    1 << (n - 1 - i)
}

pub fn excitation(index: usize) -> usize {
    index.count_ones() as usize
}

/// Index of a product state given as a bit string such as "010".
pub fn basis_index(bits: &str) -> usize {
    bits.chars().fold(0, |acc, c| (acc << 1) | usize::from(c == '1'))
}

pub fn basis_label(index: usize, n: usize) -> String {
    (0..n).map(|i| if index & qubit_mask(i, n) != 0 { '1' } else { '0' }).collect()
}

/// σ₋ of qubit `i`.
pub fn sigma_minus(i: usize, n: usize) -> DMatrix<C> {
    let d = dim(n);
    let mask = qubit_mask(i, n);
    let mut m = DMatrix::zeros(d, d);
    for s in 0..d {
        if s & mask != 0 {
            m[(s ^ mask, s)] = C::new(1.0, 0.0);
        }
    }
    m
}

pub fn sigma_plus(i: usize, n: usize) -> DMatrix<C> {
    sigma_minus(i, n).transpose()
}

/// Σᵢⱼ Mᵢⱼ σᵢ₊σⱼ₋ for a complex N×N matrix M.
pub fn hopping_operator(m: &DMatrix<C>) -> DMatrix<C> {
    let n = m.nrows();
    let d = dim(n);
    let mut h = DMatrix::zeros(d, d);
    for s in 0..d {
        for j in 0..n {
            let mj = qubit_mask(j, n);
            if s & mj == 0 {
                continue;
            }
            let t = s ^ mj;
            for i in 0..n {
                let mi = qubit_mask(i, n);
                if t & mi == 0 {
                    h[(t | mi, s)] += m[(i, j)];
                }
            }
        }
    }
    h
}

/// Free Hamiltonian Σᵢⱼ (Δᵢⱼ − (i/2)γᵢⱼ) σᵢ₊σⱼ₋ in the frame rotating at the
/// bare transition frequency, optionally without the decay part.
pub fn free_hamiltonian(c: &CouplingSet, decay: Decay) -> DMatrix<C> {
    let m = match decay {
        Decay::Include => c.xi_matrix(),
        Decay::Neglect => c.delta.map(C::from),
    };
    hopping_operator(&m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(pub DVector<C>);

impl StateVector {
    pub fn basis(index: usize, n: usize) -> Self {
        let mut v = DVector::zeros(dim(n));
        v[index] = C::new(1.0, 0.0);
        StateVector(v)
    }

    /// Product state from a bit string, e.g. `"000"`.
    pub fn product(bits: &str) -> Self {
        Self::basis(basis_index(bits), bits.len())
    }

    /// Normalised superposition from (bit string, amplitude) pairs.
    pub fn superposition(terms: &[(&str, f64)]) -> Self {
        let n = terms[0].0.len();
        let mut v = DVector::zeros(dim(n));
        for (bits, a) in terms {
            v[basis_index(bits)] += C::new(*a, 0.0);
        }
        let norm = v.norm();
        StateVector(v / C::from(norm))
    }

    pub fn from_vector(v: DVector<C>) -> Self {
        StateVector(v)
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &DVector<C> {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn inner(&self, other: &StateVector) -> C {
        self.0.dotc(&other.0)
    }

    pub fn normalized(&self) -> Result<StateVector> {
        let n = self.0.norm();
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(StateVector(&self.0 / C::from(n)))
    }

    pub fn density(&self) -> DMatrix<C> {
        &self.0 * self.0.adjoint()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fidelity {
    /// |⟨target|ψ⟩|² / ⟨ψ|ψ⟩
    pub conditional: f64,
    /// |⟨target|ψ⟩|²
    pub raw: f64,
}

pub fn fidelity(psi: &StateVector, target: &StateVector) -> Result<Fidelity> {
    let norm = psi.norm_sqr();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let raw = target.inner(psi).norm_sqr();
    Ok(Fidelity { conditional: (raw / norm).min(1.0), raw })
}

#[derive(Clone, Debug)]
pub struct Level {
    pub label: char,
    /// Real part of the eigenvalue.
    pub energy: f64,
    /// −2 Im of the eigenvalue.
    pub linewidth: f64,
    pub eigenvalue: C,
    pub excitation: usize,
    /// Unit-norm right eigenvector.
    pub right: DVector<C>,
    /// Dual vector with ⟨left|right⟩ = 1.
    pub left: DVector<C>,
}

#[derive(Clone, Debug)]
pub struct CollectiveBasis {
    pub levels: Vec<Level>,
    pub n: usize,
    pub decay: Decay,
    /// Largest |⟨Rᵢ|Rⱼ⟩| over distinct levels.
    pub non_orthogonality: f64,
    /// Set when some excitation block has an ill-conditioned eigenbasis.
    pub defective: bool,
}

pub fn level_label(k: usize) -> char {
    (b'a' + k as u8) as char
}

impl CollectiveBasis {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn labels(&self) -> Vec<char> {
        self.levels.iter().map(|l| l.label).collect()
    }

    pub fn index(&self, label: char) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    pub fn level(&self, label: char) -> &Level {
        &self.levels[self.index(label).unwrap_or_else(|| panic!("no level '{label}'"))]
    }

    pub fn state(&self, label: char) -> StateVector {
        StateVector(self.level(label).right.clone())
    }

    pub fn biorthogonal(&self) -> bool {
        self.non_orthogonality > NON_ORTHOGONALITY_THRESHOLD
    }

    /// Population of every level in the (unnormalised) state `psi`.
    pub fn populations(&self, psi: &DVector<C>) -> Vec<f64> {
        if self.biorthogonal() {
            self.levels.iter().map(|l| (l.left.transpose() * psi)[0].norm_sqr()).collect()
        } else {
            self.levels.iter().map(|l| l.right.dotc(psi).norm_sqr()).collect()
        }
    }

    /// Population of every level in a density matrix.
    pub fn populations_rho(&self, rho: &DMatrix<C>) -> Vec<f64> {
        if self.biorthogonal() {
            self.levels
                .iter()
                .map(|l| (l.left.transpose() * rho * l.left.conjugate())[0].re)
                .collect()
        } else {
            self.levels.iter().map(|l| (l.right.adjoint() * rho * &l.right)[0].re).collect()
        }
    }

    /// Rebuilds Σ λₖ |Rₖ⟩⟨Lₖ|.
    pub fn reconstruct(&self) -> DMatrix<C> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for l in &self.levels {
            m += &l.right * l.left.transpose() * l.eigenvalue;
        }
        m
    }
}

/// Fully symmetric Dicke state with `k` excitations, used to order exactly
/// degenerate levels.
fn dicke_symmetric(n: usize, k: usize) -> DVector<C> {
    let v = DVector::from_fn(dim(n), |s, _| if excitation(s) == k { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) });
    let norm = v.norm();
    v / C::from(norm)
}

/// Collective eigenbasis of the full non-Hermitian free Hamiltonian.
pub fn collective_eigenbasis(c: &CouplingSet) -> CollectiveBasis {
    collective_eigenbasis_with(c, Decay::Include)
}

/// Collective eigenbasis with the decay part kept or dropped. Levels are
/// ordered by excitation number (the bare ω₀ dominates every shift) and then
/// by energy; the labels run a, b, c, ...
pub fn collective_eigenbasis_with(c: &CouplingSet, decay: Decay) -> CollectiveBasis {
    let n = c.n();
    let h = free_hamiltonian(c, decay);
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut levels = Vec::with_capacity(dim(n));
    let mut defective = false;
    for k in 0..=n {
        let idx: Vec<usize> = (0..dim(n)).filter(|&s| excitation(s) == k).collect();
        let block = DMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])]);
        let embed = |v: DVector<C>| {
            let mut full = DVector::zeros(dim(n));
            for (i, &s) in idx.iter().enumerate() {
                full[s] = v[i];
            }
            full
        };
        let mut sector: Vec<Level> = match decay {
            Decay::Neglect => {
                let (vals, vecs) = linalg::hermitian_eigen(&block);
                (0..idx.len())
                    .map(|m| {
                        let v = embed(vecs.column(m).into_owned());
                        Level {
                            label: ' ',
                            energy: vals[m],
                            linewidth: 0.0,
                            eigenvalue: C::from(vals[m]),
                            excitation: k,
                            left: v.conjugate(),
                            right: v,
                        }
                    })
                    .collect()
            }
            Decay::Include => {
                let e = linalg::general_eigen(&block);
                defective |= e.defective();
                (0..idx.len())
                    .map(|m| Level {
                        label: ' ',
                        energy: e.values[m].re,
                        linewidth: -2.0 * e.values[m].im,
                        eigenvalue: e.values[m],
                        excitation: k,
                        right: embed(e.right.column(m).into_owned()),
                        left: embed(e.left.row(m).transpose()),
                    })
                    .collect()
            }
        };
        let sym = dicke_symmetric(n, k);
        sector.sort_by(|a, b| {
            if (a.energy - b.energy).abs() < 1e-9 * scale {
                let oa = sym.dotc(&a.right).norm_sqr();
                let ob = sym.dotc(&b.right).norm_sqr();
                ob.total_cmp(&oa)
            } else {
                a.energy.total_cmp(&b.energy)
            }
        });
        levels.extend(sector);
    }
    for (k, l) in levels.iter_mut().enumerate() {
        l.label = level_label(k);
    }
    let mut non_orthogonality: f64 = 0.0;
    for i in 0..levels.len() {
        for j in (i + 1)..levels.len() {
            non_orthogonality = non_orthogonality.max(levels[i].right.dotc(&levels[j].right).norm());
        }
    }
    CollectiveBasis { levels, n, decay, non_orthogonality, defective }
}

/// The two four-emitter states spanning the decoherence-free subspace:
/// |0⟩_L = ½(|01⟩ − |10⟩)(|01⟩ − |10⟩) and
/// |1⟩_L = (2|0011⟩ + 2|1100⟩ − |0101⟩ − |1010⟩ − |0110⟩ − |1001⟩)/√12.
pub fn dfs4_states() -> (StateVector, StateVector) {
    let zero = StateVector::superposition(&[("0101", 1.0), ("0110", -1.0), ("1001", -1.0), ("1010", 1.0)]);
    let one = StateVector::superposition(&[
        ("0011", 2.0),
        ("1100", 2.0),
        ("0101", -1.0),
        ("1010", -1.0),
        ("0110", -1.0),
        ("1001", -1.0),
    ]);
    (zero, one)
}
