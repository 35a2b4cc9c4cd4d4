//! Driven no-jump and Lindblad dynamics in the frame rotating at ω₀.

use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingSet, PSD_TOLERANCE};
use crate::geometry::Geometry;
pub use crate::hilbert::Decay;
use crate::hilbert::{self, collective_eigenbasis_with, free_hamiltonian, level_label, sigma_minus, StateVector};
use crate::linalg;
use crate::ode::{self, DenseStep, OdeOptions, Stats};
use crate::{Error, Result};

type C = Complex64;

/// Most negative density-matrix eigenvalue tolerated before flagging.
pub const POSITIVITY_TOLERANCE: f64 = 1e-7;

/// One classical field tone: Rabi amplitude and detuning from ω₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub rabi: f64,
    pub detuning: f64,
}

/// Propagation direction of the driving field relative to the array.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Wavevector {
    /// k along the array axis: emitter i sees phase k₀xᵢ.
    #[default]
    AlongAxis,
    /// k orthogonal to the array: all emitters in phase.
    Orthogonal,
}

/// H_I(t) = Σ_tones E (e^{−iωt} V + e^{iωt} V†), V = Σᵢ e^{−iφᵢ} σᵢ₊.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub tones: Vec<Tone>,
    /// Per-emitter phase φᵢ = k·rᵢ.
    pub phases: Vec<f64>,
}

impl DriveSpec {
    pub fn new(tones: Vec<Tone>, phases: Vec<f64>) -> Result<Self> {
        if tones.len() > 2 {
            return Err(Error::InvalidParameter(format!("at most two tones, got {}", tones.len())));
        }
        if tones.iter().any(|t| !(t.rabi.is_finite() && t.rabi >= 0.0 && t.detuning.is_finite())) {
            return Err(Error::InvalidParameter("tone amplitudes must be finite and >= 0".into()));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("phases must be finite".into()));
        }
        Ok(DriveSpec { tones, phases })
    }

    pub fn none(n: usize) -> Self {
        DriveSpec { tones: Vec::new(), phases: vec![0.0; n] }
    }

    pub fn for_geometry(tones: Vec<Tone>, g: &Geometry, k: Wavevector) -> Result<Self> {
        let phases = match k {
            Wavevector::AlongAxis => g.axis_phases(),
            Wavevector::Orthogonal => vec![0.0; g.n()],
        };
        Self::new(tones, phases)
    }

    /// V = Σᵢ e^{−iφᵢ} σᵢ₊.
    pub fn raising_operator(&self) -> DMatrix<C> {
        let n = self.phases.len();
        let d = hilbert::dim(n);
        let mut v = DMatrix::zeros(d, d);
        for (i, phi) in self.phases.iter().enumerate() {
            v += hilbert::sigma_plus(i, n) * C::from_polar(1.0, -phi);
        }
        v
    }

    /// Copy with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> DriveSpec {
        let tones = self.tones.iter().map(|t| Tone { rabi: t.rabi * factor, ..*t }).collect();
        DriveSpec { tones, phases: self.phases.clone() }
    }
}

/// Effective no-jump Hamiltonian H_S + H_I(t), decay included.
pub fn build_h_eff(c: &CouplingSet, d: &DriveSpec, t: f64) -> DMatrix<C> {
    build_h_eff_with(c, d, t, Decay::Include)
}

pub fn build_h_eff_with(c: &CouplingSet, d: &DriveSpec, t: f64, decay: Decay) -> DMatrix<C> {
    let mut h = free_hamiltonian(c, decay);
    if !d.tones.is_empty() {
        let v = d.raising_operator();
        let vd = v.adjoint();
        for tone in &d.tones {
            let ph = C::from_polar(tone.rabi, -tone.detuning * t);
            h += &v * ph + &vd * ph.conj();
        }
    }
    h
}

/// Collapse operators from the diagonalised relaxation matrix.
#[derive(Clone, Debug)]
pub struct JumpSet {
    /// Descending; tiny negative values clamped to zero.
    pub eigvals: Vec<f64>,
    /// Column l holds the orthonormal vector b_l.
    pub vecs: DMatrix<f64>,
    /// J_l = √λ_l Σᵢ b_{li} σᵢ₋.
    pub operators: Vec<DMatrix<C>>,
}

impl JumpSet {
    /// Σ_l J_l† J_l.
    pub fn decay_operator(&self) -> DMatrix<C> {
        let d = self.operators.first().map_or(1, |j| j.nrows());
        self.operators.iter().fold(DMatrix::zeros(d, d), |acc, j| acc + j.adjoint() * j)
    }
}

pub fn jump_operators(c: &CouplingSet) -> Result<JumpSet> {
    let n = c.n();
    let (vals, vecs) = linalg::symmetric_eigen_desc(&c.gammas);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    let eigvals: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
    let lowering: Vec<DMatrix<C>> = (0..n).map(|i| sigma_minus(i, n)).collect();
    let operators = (0..n)
        .map(|l| {
            let s = eigvals[l].sqrt();
            lowering.iter().enumerate().fold(DMatrix::zeros(hilbert::dim(n), hilbert::dim(n)), |acc, (i, sm)| {
                acc + sm * C::from(s * vecs[(i, l)])
            })
        })
        .collect();
    Ok(JumpSet { eigvals, vecs, operators })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Whether the no-jump Hamiltonian keeps its anti-Hermitian part.
    /// Lindblad evolution always includes decay.
    pub decay: Decay,
    /// Number of uniformly spaced records, endpoints included.
    pub samples: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { rtol: 1e-9, atol: 1e-12, decay: Decay::Include, samples: 201 }
    }
}

impl EvolveOptions {
    pub fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..Default::default() }
    }
}

/// Precomputed right-hand side of i dψ/dt = H(t)ψ.
#[derive(Clone, Debug)]
pub struct NoJumpSystem {
    dim: usize,
    h0: Vec<C>,
    v: Vec<C>,
    tones: Vec<Tone>,
}

impl NoJumpSystem {
    pub fn new(c: &CouplingSet, d: &DriveSpec, decay: Decay) -> Result<Self> {
        if d.phases.len() != c.n() {
            return Err(Error::InvalidParameter(format!(
                "drive has {} phases for {} emitters",
                d.phases.len(),
                c.n()
            )));
        }
        let h0 = free_hamiltonian(c, decay);
        let dim = h0.nrows();
        // row-major copies for the inner loop
        let rows = |m: &DMatrix<C>| (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
        let v = d.raising_operator();
        Ok(NoJumpSystem { dim, h0: rows(&h0), v: rows(&v), tones: d.tones.clone() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// dψ/dt = −i H(t) ψ.
    pub fn rhs(&self, t: f64, y: &[C], dy: &mut [C]) {
        let n = self.dim;
        let mut coef = C::new(0.0, 0.0);
        for tone in &self.tones {
            coef += C::from_polar(tone.rabi, -tone.detuning * t);
        }
        let coef_c = coef.conj();
        let drive = !self.tones.is_empty();
        for i in 0..n {
            let row = &self.h0[i * n..(i + 1) * n];
            let mut acc = C::new(0.0, 0.0);
            for j in 0..n {
                acc += row[j] * y[j];
            }
            if drive {
                // (V coef + V† coef*) y; V is real-sparse so loop over both.
                let vrow = &self.v[i * n..(i + 1) * n];
                let mut a = C::new(0.0, 0.0);
                let mut b = C::new(0.0, 0.0);
                for j in 0..n {
                    a += vrow[j] * y[j];
                    b += self.v[j * n + i].conj() * y[j];
                }
                acc += a * coef + b * coef_c;
            }
            dy[i] = C::new(acc.im, -acc.re);
        }
    }

    /// Runs the integrator from `psi0`, calling `observer` per accepted step.
    pub fn run<O>(&self, psi0: &StateVector, t_end: f64, opts: &OdeOptions, observer: O) -> Result<(Vec<C>, f64, Stats)>
    where
        O: FnMut(&DenseStep) -> ControlFlow<()>,
    {
        if psi0.0.len() != self.dim {
            return Err(Error::InvalidParameter("initial state dimension mismatch".into()));
        }
        let mut y: Vec<C> = psi0.0.iter().copied().collect();
        let (t, stats) = ode::integrate(|t, y, dy| self.rhs(t, y, dy), 0.0, &mut y, t_end, opts, observer)?;
        Ok((y, t, stats))
    }
}

#[derive(Clone, Debug)]
pub enum States {
    Pure(Vec<StateVector>),
    Mixed(Vec<DMatrix<C>>),
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: States,
    /// ⟨ψ|ψ⟩ for no-jump runs, tr ρ for Lindblad runs.
    pub norms: Vec<f64>,
    /// Lindblad only: tr ρ₀ of the zero-emission conditional state.
    pub no_jump_probability: Vec<f64>,
    /// Raw collective populations per record, one entry per level.
    pub populations: Vec<Vec<f64>>,
    pub labels: Vec<char>,
    /// Smallest density-matrix eigenvalue seen (Lindblad only).
    pub min_eigenvalue: f64,
    pub positivity_warning: bool,
    pub stats: Stats,
}

impl Trajectory {
    /// Populations divided by the record's norm.
    pub fn renormalized_populations(&self) -> Vec<Vec<f64>> {
        self.populations
            .iter()
            .zip(&self.norms)
            .map(|(p, n)| p.iter().map(|x| if *n > 0.0 { x / n } else { 0.0 }).collect())
            .collect()
    }

    pub fn population_of(&self, label: char) -> Vec<f64> {
        let k = self.labels.iter().position(|&l| l == label).expect("unknown level label");
        self.populations.iter().map(|p| p[k]).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn sample_grid(t_end: f64, samples: usize) -> Vec<f64> {
    let m = samples.max(2);
    (0..m).map(|k| t_end * k as f64 / (m - 1) as f64).collect()
}

/// Records states at grid times falling inside each accepted step.
struct Recorder {
    grid: Vec<f64>,
    next: usize,
    out: Vec<(f64, Vec<C>)>,
}

impl Recorder {
    fn new(grid: Vec<f64>, y0: &[C]) -> Self {
        let out = vec![(grid[0], y0.to_vec())];
        Recorder { grid, next: 1, out }
    }

    fn observe(&mut self, d: &DenseStep) {
        while self.next < self.grid.len() && self.grid[self.next] <= d.t1 {
            let t = self.grid[self.next];
            self.out.push((t, d.eval(t)));
            self.next += 1;
        }
    }
}

/// Integrates i dψ/dt = H_eff(t)ψ and records collective populations.
pub fn evolve_nojump(psi0: &StateVector, c: &CouplingSet, d: &DriveSpec, t_end: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    if (psi0.norm_sqr() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("initial state must be normalised".into()));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    let sys = NoJumpSystem::new(c, d, opts.decay)?;
    let y0: Vec<C> = psi0.0.iter().copied().collect();
    let mut rec = Recorder::new(sample_grid(t_end, opts.samples), &y0);
    let (_, _, stats) = sys.run(psi0, t_end, &opts.ode(), |step| {
        rec.observe(step);
        ControlFlow::Continue(())
    })?;
    let basis = collective_eigenbasis_with(c, opts.decay);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut norms = Vec::new();
    let mut populations = Vec::new();
    for (t, y) in rec.out {
        let v = DVector::from_vec(y);
        times.push(t);
        norms.push(v.norm_squared());
        populations.push(basis.populations(&v));
        states.push(StateVector(v));
    }
    Ok(Trajectory {
        times,
        states: States::Pure(states),
        norms,
        no_jump_probability: Vec::new(),
        populations,
        labels: basis.labels(),
        min_eigenvalue: 0.0,
        positivity_warning: false,
        stats,
    })
}

/// Right-hand side of the master equation, integrated together with the
/// zero-emission conditional state ρ₀ (dρ₀/dt = −i(Hρ₀ − ρ₀H†)).
#[derive(Clone, Debug)]
pub struct LindbladSystem {
    dim: usize,
    h0: DMatrix<C>,
    v: DMatrix<C>,
    tones: Vec<Tone>,
    jumps: Vec<DMatrix<C>>,
}

impl LindbladSystem {
    pub fn new(c: &CouplingSet, d: &DriveSpec) -> Result<Self> {
        if d.phases.len() != c.n() {
            return Err(Error::InvalidParameter("drive phase count does not match emitters".into()));
        }
        let h0 = free_hamiltonian(c, Decay::Include);
        let jumps = jump_operators(c)?.operators.into_iter().filter(|j| j.norm() > 0.0).collect();
        Ok(LindbladSystem { dim: h0.nrows(), h0, v: d.raising_operator(), tones: d.tones.clone(), jumps })
    }

    fn hamiltonian(&self, t: f64) -> DMatrix<C> {
        let mut h = self.h0.clone();
        if !self.tones.is_empty() {
            let coef: C = self.tones.iter().map(|tone| C::from_polar(tone.rabi, -tone.detuning * t)).sum();
            h += &self.v * coef + self.v.adjoint() * coef.conj();
        }
        h
    }

    pub fn rhs(&self, t: f64, y: &[C], dy: &mut [C]) {
        let n = self.dim;
        let nn = n * n;
        let h = self.hamiltonian(t);
        let hd = h.adjoint();
        let mi = C::new(0.0, -1.0);
        for (block, with_jumps) in [(0usize, true), (1, false)] {
            let rho = DMatrix::from_column_slice(n, n, &y[block * nn..(block + 1) * nn]);
            let mut out = (&h * &rho - &rho * &hd) * mi;
            if with_jumps {
                for j in &self.jumps {
                    out += j * &rho * j.adjoint();
                }
            }
            dy[block * nn..(block + 1) * nn].copy_from_slice(out.as_slice());
        }
    }
}

fn hermitize(y: &mut [C], n: usize) -> bool {
    let nn = n * n;
    for block in y.chunks_mut(nn) {
        for i in 0..n {
            for j in i..n {
                let a = block[i + j * n];
                let b = block[j + i * n];
                let m = (a + b.conj()) * 0.5;
                block[i + j * n] = m;
                block[j + i * n] = m.conj();
            }
        }
    }
    true
}

/// Integrates the master equation dρ/dt = −i(H_eff ρ − ρH_eff†) + Σ_l J_l ρ J_l†.
pub fn evolve_lindblad(rho0: &DMatrix<C>, c: &CouplingSet, d: &DriveSpec, t_end: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    let sys = LindbladSystem::new(c, d)?;
    let n = sys.dim;
    if rho0.shape() != (n, n) {
        return Err(Error::InvalidParameter("density matrix dimension mismatch".into()));
    }
    if (rho0.trace().re - 1.0).abs() > 1e-9 || (rho0 - rho0.adjoint()).norm() > 1e-12 {
        return Err(Error::InvalidParameter("initial density matrix must be Hermitian with unit trace".into()));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    let mut y: Vec<C> = rho0.as_slice().iter().chain(rho0.as_slice()).copied().collect();
    let mut rec = Recorder::new(sample_grid(t_end, opts.samples), &y);
    let (_, stats) = ode::integrate_projected(
        |t, y, dy| sys.rhs(t, y, dy),
        |y| hermitize(y, n),
        0.0,
        &mut y,
        t_end,
        &opts.ode(),
        |step| {
            rec.observe(step);
            ControlFlow::Continue(())
        },
    )?;
    let basis = collective_eigenbasis_with(c, Decay::Include);
    let nn = n * n;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: States::Mixed(Vec::new()),
        norms: Vec::new(),
        no_jump_probability: Vec::new(),
        populations: Vec::new(),
        labels: basis.labels(),
        min_eigenvalue: f64::INFINITY,
        positivity_warning: false,
        stats,
    };
    let mut mats = Vec::new();
    for (t, mut y) in rec.out {
        hermitize(&mut y, n);
        let rho = DMatrix::from_column_slice(n, n, &y[..nn]);
        let rho_c = DMatrix::from_column_slice(n, n, &y[nn..]);
        let (ev, _) = linalg::hermitian_eigen(&rho);
        traj.min_eigenvalue = traj.min_eigenvalue.min(ev[0]);
        traj.times.push(t);
        traj.norms.push(rho.trace().re);
        traj.no_jump_probability.push(rho_c.trace().re);
        traj.populations.push(basis.populations_rho(&rho));
        mats.push(rho);
    }
    traj.positivity_warning = traj.min_eigenvalue < -POSITIVITY_TOLERANCE;
    traj.states = States::Mixed(mats);
    Ok(traj)
}

/// Level labels for an N-emitter basis.
pub fn labels(n: usize) -> Vec<char> {
    (0..hilbert::dim(n)).map(level_label).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::coupling_matrices;
    use crate::hilbert::hopping_operator;

    fn couplings(xi: f64, alpha: f64) -> CouplingSet {
        coupling_matrices(&Geometry::linear(xi, 3, alpha).unwrap()).unwrap()
    }

    #[test]
    fn undriven_heff_is_free_hamiltonian() {
        let c = couplings(0.5, 0.0);
        let h = build_h_eff(&c, &DriveSpec::none(3), 3.7);
        assert_eq!(h, free_hamiltonian(&c, Decay::Include));
    }

    #[test]
    fn single_tone_couples_each_flip() {
        let c = CouplingSet::independent(3);
        let d = DriveSpec::new(vec![Tone { rabi: 0.7, detuning: 5.0 }], vec![0.0; 3]).unwrap();
        let h = build_h_eff_with(&c, &d, 0.0, Decay::Neglect);
        for s in 0..8usize {
            for i in 0..3 {
                let m = hilbert::qubit_mask(i, 3);
                assert!((h[(s ^ m, s)] - C::from(0.7)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn jump_reconstruction() {
        for (xi, alpha) in [(0.5, 0.0), (0.15, std::f64::consts::FRAC_PI_2), (1e-3, 0.0)] {
            let c = couplings(xi, alpha);
            let j = jump_operators(&c).unwrap();
            let target = hopping_operator(&c.gammas.map(C::from));
            assert!((j.decay_operator() - target).norm() < 1e-10);
            assert!(j.eigvals.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn dicke_limit_jumps() {
        let j = jump_operators(&couplings(1e-3, 0.0)).unwrap();
        assert!((j.eigvals[0] - 3.0).abs() < 1e-3);
        assert!(j.eigvals[1] < 1e-3 && j.eigvals[2] < 1e-3);
        let b: Vec<f64> = (0..3).map(|i| j.vecs[(i, 0)].abs()).collect();
        assert!(b.iter().all(|x| (x - 1.0 / 3f64.sqrt()).abs() < 1e-3));
    }

    #[test]
    fn independent_decay_jumps() {
        let j = jump_operators(&CouplingSet::independent(3)).unwrap();
        for l in 0..3 {
            let single: Vec<usize> = (0..3).filter(|&i| j.vecs[(i, l)].abs() > 0.5).collect();
            assert_eq!(single.len(), 1);
            let op = &j.operators[l];
            let sm = sigma_minus(single[0], 3);
            assert!((op - sm * C::from(j.vecs[(single[0], l)])).norm() < 1e-12);
        }
    }

    #[test]
    fn uncoupled_undriven_state_is_static() {
        let psi = StateVector::superposition(&[("000", 1.0), ("101", 1.0)]);
        let c = CouplingSet { delta: DMatrix::zeros(3, 3), gammas: DMatrix::zeros(3, 3) };
        let t = evolve_nojump(&psi, &c, &DriveSpec::none(3), 5.0, &EvolveOptions::default()).unwrap();
        let States::Pure(s) = &t.states else { panic!() };
        assert!((&s.last().unwrap().0 - &psi.0).norm() < 1e-12);
        assert!(t.norms.iter().all(|n| (n - 1.0).abs() < 1e-12));
    }

    #[test]
    fn nojump_norm_decreases_at_decay_rate() {
        let c = couplings(0.3, 0.0);
        let d = DriveSpec::new(vec![Tone { rabi: 1.5, detuning: -3.0 }], vec![0.0, 0.3, 0.6]).unwrap();
        let psi = StateVector::product("000");
        let opts = EvolveOptions { samples: 8001, ..Default::default() };
        let traj = evolve_nojump(&psi, &c, &d, 4.0, &opts).unwrap();
        assert!(traj.norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let gam = jump_operators(&c).unwrap().decay_operator();
        let States::Pure(states) = &traj.states else { panic!() };
        for k in (100..7900).step_by(700) {
            let dt = traj.times[k + 1] - traj.times[k - 1];
            let numeric = (traj.norms[k + 1] - traj.norms[k - 1]) / dt;
            let v = &states[k].0;
            let exact = -(v.adjoint() * &gam * v)[0].re;
            assert!((numeric - exact).abs() < 1e-3 * exact.abs().max(1e-3), "{numeric} vs {exact}");
        }
    }

    #[test]
    fn halving_tolerance_is_self_consistent() {
        let c = couplings(0.5, 0.0);
        let d = DriveSpec::new(vec![Tone { rabi: 1.0, detuning: -20.0 }], vec![0.0, 0.5, 1.0]).unwrap();
        let psi = StateVector::product("000");
        let run = |tol: f64| {
            let o = EvolveOptions { rtol: tol, atol: tol * 1e-3, samples: 2, ..Default::default() };
            let t = evolve_nojump(&psi, &c, &d, 2.0, &o).unwrap();
            let States::Pure(s) = t.states else { panic!() };
            s.last().unwrap().0.clone()
        };
        let tol = 1e-8;
        let a = run(tol);
        let b = run(tol / 2.0);
        let reference = run(1e-13);
        assert!((&a - &b).norm() < 10.0 * tol * 100.0);
        assert!((&b - &reference).norm() < (&a - &reference).norm() * 1.5 + 1e-12);
    }

    #[test]
    fn lindblad_ground_state_is_stationary() {
        let c = couplings(0.5, 0.0);
        let rho0 = StateVector::product("000").density();
        let t = evolve_lindblad(&rho0, &c, &DriveSpec::none(3), 5.0, &EvolveOptions::default()).unwrap();
        let States::Mixed(m) = &t.states else { panic!() };
        assert!((m.last().unwrap() - &rho0).norm() < 1e-12);
    }

    #[test]
    fn dicke_limit_superradiant_decay() {
        let c = CouplingSet::dicke(3);
        let rho0 = StateVector::product("111").density();
        let opts = EvolveOptions { samples: 11, ..Default::default() };
        let t = evolve_lindblad(&rho0, &c, &DriveSpec::none(3), 0.5, &opts).unwrap();
        let States::Mixed(m) = &t.states else { panic!() };
        let nexc = hopping_operator(&DMatrix::<f64>::identity(3, 3).map(C::from));
        for (k, rho) in m.iter().enumerate().skip(1).take(4) {
            let excited = (rho * &nexc).trace().re;
            let independent = 3.0 * (-t.times[k]).exp();
            assert!(excited < independent, "t={} {excited} vs {independent}", t.times[k]);
        }
        assert!(t.norms.iter().all(|n| (n - 1.0).abs() < 1e-9));
    }

    #[test]
    fn dark_state_is_stationary() {
        let c = CouplingSet::dicke(3);
        let dark = StateVector::superposition(&[("010", 1.0), ("100", -1.0)]);
        let opts = EvolveOptions { samples: 3, ..Default::default() };
        let t = evolve_lindblad(&dark.density(), &c, &DriveSpec::none(3), 100.0, &opts).unwrap();
        let States::Mixed(m) = &t.states else { panic!() };
        assert!((m.last().unwrap() - dark.density()).norm() < 1e-6);
        assert!(t.norms.iter().all(|n| (n - 1.0).abs() < 1e-9));
    }

    #[test]
    fn trace_is_conserved_with_drive() {
        let c = couplings(0.3, 0.0);
        let d = DriveSpec::new(vec![Tone { rabi: 2.0, detuning: 1.0 }], vec![0.0, 1.0, 2.0]).unwrap();
        let rho0 = StateVector::product("000").density();
        let t = evolve_lindblad(&rho0, &c, &d, 10.0, &EvolveOptions { samples: 51, ..Default::default() }).unwrap();
        assert!(t.norms.iter().all(|n| (n - 1.0).abs() < 1e-9));
        assert!(!t.positivity_warning, "{}", t.min_eigenvalue);
    }

    #[test]
    fn nojump_matches_conditional_lindblad() {
        let c = couplings(0.4, 0.0);
        let d = DriveSpec::new(vec![Tone { rabi: 0.3, detuning: -5.0 }], vec![0.0, 0.4, 0.8]).unwrap();
        let psi = StateVector::product("000");
        let opts = EvolveOptions { samples: 21, ..Default::default() };
        let a = evolve_nojump(&psi, &c, &d, 3.0, &opts).unwrap();
        let b = evolve_lindblad(&psi.density(), &c, &d, 3.0, &opts).unwrap();
        for (x, y) in a.norms.iter().zip(&b.no_jump_probability) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
