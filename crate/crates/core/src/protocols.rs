//! Preparation, logical rotation, readout and four-emitter CPHASE, with the
//! closed-form effective couplings as cross-checks of the full dynamics.

use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::coupling::{coupling_matrices, spectral_params, CouplingSet, SpectralParams};
use crate::dynamics::{evolve_lindblad, DriveSpec, EvolveOptions, NoJumpSystem, States, Tone, Trajectory, Wavevector};
use crate::geometry::Geometry;
use crate::hilbert::{collective_eigenbasis, collective_eigenbasis_with, fidelity, CollectiveBasis, Decay, StateVector};
use crate::ode::{DenseStep, OdeOptions, Stats};
use crate::{Error, Result};

type C = Complex64;

/// A first maximum must reach this population to count as an inversion.
pub const INVERSION_THRESHOLD: f64 = 0.5;
/// Drop below the running maximum that ends the first-maximum search.
const INVERSION_DROP: f64 = 0.2;
/// Target-population samples taken inside every accepted step.
const SAMPLES_PER_STEP: usize = 8;
/// Resolution of the t_π refinement.
pub const T_PI_RESOLUTION: f64 = 1e-6;

/// Residual population in level l that flags a leaky CPHASE pulse.
pub const CPHASE_LEAKAGE_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtocolOptions {
    /// Decay part of the no-jump Hamiltonian; the reference figures are
    /// reproduced with the coherent part only.
    pub decay: Decay,
    pub wavevector: Wavevector,
    pub rtol: f64,
    pub atol: f64,
    /// Trajectory records kept in the result.
    pub samples: usize,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions { decay: Decay::Neglect, wavevector: Wavevector::AlongAxis, rtol: 1e-9, atol: 1e-12, samples: 401 }
    }
}

impl ProtocolOptions {
    pub fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..Default::default() }
    }
}

/// Inputs of a protocol run, echoed into every result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolParams {
    pub protocol: &'static str,
    pub geometry: Geometry,
    pub tones: Vec<Tone>,
    pub phases: Vec<f64>,
    pub omega_delta: Option<f64>,
    pub initial: char,
    pub target: char,
    pub t_end: f64,
    pub options: ProtocolOptions,
}

#[derive(Clone, Debug)]
pub struct ProtocolResult {
    /// Conditional fidelity with the target level at t_π.
    pub fidelity: f64,
    /// Unnormalised overlap |⟨target|ψ(t_π)⟩|².
    pub fidelity_raw: f64,
    pub t_pi: f64,
    /// Inversions (or rotations) per lifetime of the levels involved.
    pub merit: f64,
    /// Linewidth entering the merit.
    pub linewidth: f64,
    /// Largest population outside the protocol's allowed levels for t ≤ t_π.
    pub leakage: f64,
    /// Recorded from t = 0 to the end of the first-maximum search.
    pub trajectory: Trajectory,
    pub params: ProtocolParams,
}

/// Closed-form a → b coupling for the preparation tone at ½(Δ₁₃ − Ω).
pub fn effective_prep_coupling(sp: &SpectralParams, e_mu: f64, k_dot_r: f64) -> Result<f64> {
    if sp.kappa <= 0.0 {
        return Err(Error::Singular("κ = Ω − Δ13 must be positive"));
    }
    Ok((sp.omega / sp.kappa).sqrt() / sp.omega * e_mu * (sp.kappa * k_dot_r.cos() - 2.0 * sp.d12))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationCouplings {
    pub e_be: C,
    pub e_ce: C,
    pub e_eff: C,
}

/// Closed-form b–e, c–e and Raman b–c couplings at time `t`.
pub fn effective_rotation_couplings(
    sp: &SpectralParams,
    e_mu: f64,
    e_nu: f64,
    k_dot_r: f64,
    omega_delta: f64,
    t: f64,
) -> Result<RotationCouplings> {
    if omega_delta == 0.0 {
        return Err(Error::Singular("ω_δ = 0"));
    }
    let (omega, kappa, eta, d12, d13) = (sp.omega, sp.kappa, sp.eta, sp.d12, sp.d13);
    let i = C::i();
    let kr = k_dot_r;
    let half_eta = (i * (0.5 * eta * t)).exp();
    let mix_mu = half_eta * e_mu + e_nu;
    let mix_nu = e_mu + half_eta * e_nu;

    let e_be = (-i * 0.5 * (eta - 2.0 * omega_delta) * t).exp() * mix_mu * (kappa - 8.0 * d12 * kr.cos()) / (2.0 * omega);

    let ce_den = omega * omega - d13 * (d13 + 4.0 * kappa);
    if ce_den == 0.0 {
        return Err(Error::Singular("Ω² = Δ13(Δ13 + 4κ)"));
    }
    let e_ce = (2.0 * kappa / omega).sqrt() * d12 * eta / ce_den
        * (-i * (kr - omega_delta * t)).exp()
        * (1.0 - (2.0 * i * kr).exp())
        * mix_mu;

    let pre_den = kappa * d13 - 2.0 * d12 * d12;
    if pre_den == 0.0 || kappa <= 0.0 || omega <= 0.0 {
        return Err(Error::Singular("κΔ13 = 2Δ12²"));
    }
    let e_eff = (-i * (kr + t * eta)).exp() * kappa.powf(1.5)
        / (4.0 * 2f64.sqrt() * omega_delta * pre_den * pre_den * omega.powf(1.5))
        * ((2.0 * i * kr).exp() - 1.0)
        * d12
        * eta
        * mix_mu
        * mix_nu
        * (2.0 * d12 * d12 - d13 * kappa - 2.0 * d12 * eta * kr.cos());
    Ok(RotationCouplings { e_be, e_ce, e_eff })
}

/// Time-averaged magnitude of the Raman coupling: the part of the closed
/// form that does not oscillate at η.
pub fn secular_raman_coupling(sp: &SpectralParams, e_mu: f64, e_nu: f64, k_dot_r: f64, omega_delta: f64) -> Result<f64> {
    let unit = effective_rotation_couplings(sp, 1.0, 0.0, k_dot_r, omega_delta, 0.0)?;
    // With E_ν = 0 and t = 0 the tone factors reduce to E_μ²; the secular
    // product of the tone factors is E_μE_ν.
    Ok(unit.e_eff.norm() * e_mu * e_nu)
}

/// Closed-form c–g readout coupling and the superradiant linewidth of g.
pub fn readout_coupling(sp: &SpectralParams, e_mu: f64, k_dot_r: f64) -> Result<(C, f64)> {
    let (omega, d12, d13) = (sp.omega, sp.d12, sp.d13);
    let den = 2.0 * d12 * d12 + d13 * (omega + d13);
    if den == 0.0 || omega == 0.0 {
        return Err(Error::Singular("2Δ12² + Δ13(Ω + Δ13) = 0"));
    }
    let e_cg = C::i() / 2f64.sqrt() * (1.0 + d13 / omega).sqrt() * d12 * (omega + 3.0 * d13) * e_mu * k_dot_r.sin() / den;
    let gamma_g = 0.5 * (4.0 + sp.gamma13 + (8.0 * sp.gamma12 * sp.gamma12 + sp.gamma13 * sp.gamma13).sqrt());
    Ok((e_cg, gamma_g))
}

/// Phase difference k·r between neighbouring emitters seen by the drive.
pub fn neighbour_phase(g: &Geometry, k: Wavevector) -> f64 {
    match k {
        Wavevector::AlongAxis => g.k0() * (g.positions()[1][0] - g.positions()[0][0]),
        Wavevector::Orthogonal => 0.0,
    }
}

/// A driven transfer from one collective level to another under no-jump
/// dynamics.
#[derive(Clone, Debug)]
pub struct Transfer {
    sys: NoJumpSystem,
    basis: CollectiveBasis,
    psi0: StateVector,
    target: StateVector,
    allowed: Vec<usize>,
}

/// Result of the first-maximum search.
#[derive(Clone, Debug)]
pub struct Inversion {
    pub t_pi: f64,
    pub psi: StateVector,
    /// Largest population outside the allowed levels up to t_π; 0 unless
    /// tracked.
    pub leakage: f64,
    pub t_stop: f64,
    pub stats: Stats,
}

/// Accepted steps from the one before the running maximum onwards.
struct StepWindow {
    steps: Vec<DenseStep>,
}

impl StepWindow {
    fn state(&self, t: f64) -> Vec<C> {
        let k = self.steps.partition_point(|s| s.t1 < t).min(self.steps.len() - 1);
        self.steps[k].eval(t)
    }
}

impl Transfer {
    /// `initial` and `target` are level labels of the basis built with
    /// `decay`; `allowed` lists the labels that do not count as leakage.
    pub fn new(c: &CouplingSet, drive: &DriveSpec, decay: Decay, initial: char, target: char, allowed: &[char]) -> Result<Self> {
        let basis = collective_eigenbasis_with(c, decay);
        let sys = NoJumpSystem::new(c, drive, decay)?;
        for l in allowed.iter().chain([&initial, &target]) {
            if basis.index(*l).is_none() {
                return Err(Error::InvalidParameter(format!("no level '{l}'")));
            }
        }
        let psi0 = basis.state(initial).normalized()?;
        let target = basis.state(target).normalized()?;
        let allowed = allowed.iter().filter_map(|l| basis.index(*l)).collect();
        Ok(Transfer { sys, basis, psi0, target, allowed })
    }

    /// Uses an explicit initial state instead of a level.
    pub fn with_initial(mut self, psi0: StateVector) -> Self {
        self.psi0 = psi0;
        self
    }

    pub fn target_state(&self) -> &StateVector {
        &self.target
    }

    pub fn basis(&self) -> &CollectiveBasis {
        &self.basis
    }

    fn target_population(&self, y: &[C]) -> f64 {
        self.target.0.iter().zip(y).map(|(a, b)| a.conj() * b).sum::<C>().norm_sqr()
    }

    fn leakage(&self, y: &[C]) -> f64 {
        let v = DVector::from_column_slice(y);
        let norm = v.norm_squared();
        if norm == 0.0 {
            return 0.0;
        }
        let pops = self.basis.populations(&v);
        let inside: f64 = self.allowed.iter().map(|&k| pops[k]).sum();
        (1.0 - inside / norm).max(0.0)
    }

    /// Integrates until the target population has passed its first maximum
    /// (reaching at least [`INVERSION_THRESHOLD`]) and locates that maximum.
    pub fn first_inversion(&self, t_end: f64, ode: &OdeOptions) -> Result<Inversion> {
        self.search(t_end, ode, false)
    }

    /// [`Transfer::first_inversion`] that also records the leakage.
    pub fn first_inversion_with_leakage(&self, t_end: f64, ode: &OdeOptions) -> Result<Inversion> {
        self.search(t_end, ode, true)
    }

    fn search(&self, t_end: f64, ode: &OdeOptions, track_leakage: bool) -> Result<Inversion> {
        let mut window = StepWindow { steps: Vec::new() };
        let mut best = (0.0, self.target_population(self.psi0.0.as_slice()));
        // samples bracketing the running maximum
        let (mut before, mut after) = (0.0, 0.0);
        let mut prev_t = 0.0;
        let mut just_improved = false;
        let mut leak_run = if track_leakage { self.leakage(self.psi0.0.as_slice()) } else { 0.0 };
        let mut leak_at_best = leak_run;
        let mut done = false;
        let (_, t_stop, stats) = self.sys.run(&self.psi0, t_end, ode, |step| {
            window.steps.push(step.clone());
            for j in 1..=SAMPLES_PER_STEP {
                let t = step.t0 + (step.t1 - step.t0) * j as f64 / SAMPLES_PER_STEP as f64;
                let y = step.eval(t);
                let p = self.target_population(&y);
                if track_leakage {
                    leak_run = leak_run.max(self.leakage(&y));
                }
                if just_improved {
                    after = t;
                    just_improved = false;
                }
                if p > best.1 {
                    best = (t, p);
                    before = prev_t;
                    after = t;
                    just_improved = true;
                    leak_at_best = leak_run;
                    let keep = window.steps.len().saturating_sub(2);
                    window.steps.drain(..keep);
                }
                if best.1 >= INVERSION_THRESHOLD && p < best.1 - INVERSION_DROP {
                    done = true;
                }
                prev_t = t;
            }
            if best.1 < INVERSION_THRESHOLD && window.steps.len() > 2 {
                let keep = window.steps.len() - 2;
                window.steps.drain(..keep);
            }
            if done { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
        })?;
        if !done {
            return Err(Error::NoInversion { level: self.basis.levels[0].label, t_end });
        }
        // keep the bracket inside the stored steps
        let lo = before.max(window.steps[0].t0);
        let hi = after.max(best.0);
        let (t_pi, _) = golden_max(|t| self.target_population(&window.state(t)), lo, hi, T_PI_RESOLUTION);
        let psi = window.state(t_pi);
        let leakage = if track_leakage { leak_at_best.max(self.leakage(&psi)) } else { 0.0 };
        Ok(Inversion { t_pi, psi: StateVector(DVector::from_vec(psi)), leakage, t_stop, stats })
    }

    /// State at a fixed time.
    pub fn state_at(&self, t: f64, ode: &OdeOptions) -> Result<StateVector> {
        let (y, _, _) = self.sys.run(&self.psi0, t, ode, |_| ControlFlow::Continue(()))?;
        Ok(StateVector(DVector::from_vec(y)))
    }

    /// Conditional fidelity with the target at a fixed time.
    pub fn fidelity_at(&self, t: f64, ode: &OdeOptions) -> Result<f64> {
        Ok(fidelity(&self.state_at(t, ode)?, &self.target)?.conditional)
    }

    /// Records `samples` equally spaced states on [0, t_end].
    pub fn record(&self, t_end: f64, samples: usize, ode: &OdeOptions) -> Result<Trajectory> {
        let m = samples.max(2);
        let grid: Vec<f64> = (0..m).map(|k| t_end * k as f64 / (m - 1) as f64).collect();
        let mut states = vec![self.psi0.0.clone()];
        let mut next = 1;
        let (y, _, stats) = self.sys.run(&self.psi0, t_end, ode, |step| {
            while next < m - 1 && grid[next] <= step.t1 {
                states.push(DVector::from_vec(step.eval(grid[next])));
                next += 1;
            }
            ControlFlow::Continue(())
        })?;
        while states.len() < m {
            states.push(DVector::from_vec(y.clone()));
        }
        let norms = states.iter().map(|v| v.norm_squared()).collect();
        let populations = states.iter().map(|v| self.basis.populations(v)).collect();
        Ok(Trajectory {
            times: grid,
            states: States::Pure(states.into_iter().map(StateVector).collect()),
            norms,
            no_jump_probability: Vec::new(),
            populations,
            labels: self.basis.labels(),
            min_eigenvalue: 0.0,
            positivity_warning: false,
            stats,
        })
    }

    fn result(&self, inv: Inversion, linewidth: f64, params: ProtocolParams, opts: &ProtocolOptions) -> Result<ProtocolResult> {
        let f = fidelity(&inv.psi, &self.target)?;
        let trajectory = self.record(inv.t_stop, opts.samples, &opts.ode())?;
        Ok(ProtocolResult {
            fidelity: f.conditional,
            fidelity_raw: f.raw,
            t_pi: inv.t_pi,
            merit: 1.0 / (linewidth * inv.t_pi),
            linewidth,
            leakage: inv.leakage,
            trajectory,
            params,
        })
    }
}

/// Golden-section search for the maximum of a unimodal `f` on [lo, hi].
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    [(x1, f1), (x2, f2), (x, fx)].into_iter().fold((x, fx), |a, b| if b.1 > a.1 { b } else { a })
}

/// Tone for the preparation drive, optionally detuned by a relative amount.
pub fn prep_tone(sp: &SpectralParams, e_mu: f64) -> Tone {
    Tone { rabi: e_mu, detuning: sp.prep_frequency() }
}

/// The two Raman tones for the logical rotation.
pub fn rotation_tones(sp: &SpectralParams, e_mu: f64, e_nu: f64, omega_delta: f64) -> Vec<Tone> {
    vec![Tone { rabi: e_mu, detuning: omega_delta }, Tone { rabi: e_nu, detuning: sp.rotation_nu_frequency(omega_delta) }]
}

/// Drives |000⟩ into level b and reports the first inversion.
pub fn prepare_b(g: &Geometry, e_mu: f64, t_end: f64, opts: &ProtocolOptions) -> Result<ProtocolResult> {
    let c = coupling_matrices(g)?;
    let sp = spectral_params(&c)?;
    prepare_with_tone(g, &c, prep_tone(&sp, e_mu), t_end, opts)
}

/// Preparation with an explicit tone, used for detuning and amplitude sweeps.
pub fn prepare_with_tone(g: &Geometry, c: &CouplingSet, tone: Tone, t_end: f64, opts: &ProtocolOptions) -> Result<ProtocolResult> {
    let drive = DriveSpec::for_geometry(vec![tone], g, opts.wavevector)?;
    let transfer = Transfer::new(c, &drive, opts.decay, 'a', 'b', &['a', 'b'])?;
    let inv = transfer.first_inversion_with_leakage(t_end, &opts.ode()).map_err(|e| relabel(e, 'b'))?;
    let gamma_b = collective_eigenbasis(c).level('b').linewidth;
    let params = ProtocolParams {
        protocol: "prepare",
        geometry: g.clone(),
        tones: drive.tones.clone(),
        phases: drive.phases.clone(),
        omega_delta: None,
        initial: 'a',
        target: 'b',
        t_end,
        options: *opts,
    };
    transfer.result(inv, gamma_b, params, opts)
}

fn relabel(e: Error, level: char) -> Error {
    match e {
        Error::NoInversion { t_end, .. } => Error::NoInversion { level, t_end },
        other => other,
    }
}

/// Raman rotation from level b to level c.
pub fn rotate_logical(
    g: &Geometry,
    e_mu: f64,
    e_nu: f64,
    omega_delta: f64,
    t_end: f64,
    opts: &ProtocolOptions,
) -> Result<ProtocolResult> {
    let c = coupling_matrices(g)?;
    let sp = spectral_params(&c)?;
    rotate_with_tones(g, &c, rotation_tones(&sp, e_mu, e_nu, omega_delta), Some(omega_delta), t_end, opts)
}

/// Rotation with explicit tones, used by the sweeps.
pub fn rotate_with_tones(
    g: &Geometry,
    c: &CouplingSet,
    tones: Vec<Tone>,
    omega_delta: Option<f64>,
    t_end: f64,
    opts: &ProtocolOptions,
) -> Result<ProtocolResult> {
    let drive = DriveSpec::for_geometry(tones, g, opts.wavevector)?;
    let transfer = rotation_transfer(c, &drive, opts.decay)?;
    let inv = transfer.first_inversion_with_leakage(t_end, &opts.ode()).map_err(|e| relabel(e, 'c'))?;
    let full = collective_eigenbasis(c);
    let linewidth = 0.5 * (full.level('b').linewidth + full.level('c').linewidth);
    let params = ProtocolParams {
        protocol: "rotate",
        geometry: g.clone(),
        tones: drive.tones.clone(),
        phases: drive.phases.clone(),
        omega_delta,
        initial: 'b',
        target: 'c',
        t_end,
        options: *opts,
    };
    transfer.result(inv, linewidth, params, opts)
}

pub fn rotation_transfer(c: &CouplingSet, drive: &DriveSpec, decay: Decay) -> Result<Transfer> {
    Transfer::new(c, drive, decay, 'b', 'c', &['b', 'c', 'e', 'f'])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub omega_delta: f64,
    /// Objective value at the calibrated point.
    pub fidelity: f64,
    pub nominal: f64,
    pub evaluations: usize,
}

/// Relative half-width of the calibration scan window.
pub const CALIBRATION_WINDOW: f64 = 0.2;
/// Resolution of the calibrated detuning, in γ.
pub const CALIBRATION_RESOLUTION: f64 = 0.01;
const CALIBRATION_GRID: usize = 21;

/// Maximises `objective` on [nominal(1 − w), nominal(1 + w)]: a coarse grid
/// locates the best interior point, golden-section search refines it to
/// `resolution`. Failing evaluations count as −∞.
pub fn calibrate_scan<F>(objective: F, nominal: f64, window: f64, resolution: f64) -> Result<Calibration>
where
    F: FnMut(f64) -> Result<f64>,
{
    calibrate_scan_with(objective, nominal, window, CALIBRATION_GRID, resolution)
}

/// [`calibrate_scan`] with an explicit number of coarse grid points.
pub fn calibrate_scan_with<F>(mut objective: F, nominal: f64, window: f64, points: usize, resolution: f64) -> Result<Calibration>
where
    F: FnMut(f64) -> Result<f64>,
{
    let lo = nominal - window * nominal.abs();
    let hi = nominal + window * nominal.abs();
    let mut evaluations = 0;
    let mut eval = |x: f64| {
        evaluations += 1;
        objective(x).unwrap_or(f64::NEG_INFINITY)
    };
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..points).map(|k| lo + step * k as f64).map(|x| (x, eval(x))).collect();
    let (kbest, &(_, fbest)) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    if !fbest.is_finite() || kbest == 0 || kbest == points - 1 {
        return Err(Error::NoCalibrationMaximum { lo, hi });
    }
    let (x, fx) = golden_max(&mut eval, grid[kbest - 1].0, grid[kbest + 1].0, resolution);
    Ok(Calibration { omega_delta: x, fidelity: fx, nominal, evaluations })
}

/// Tunes ω_δ so that the first Raman cycle transfers b → c with the highest
/// fidelity, absorbing the drive-induced level shifts.
pub fn calibrate_detuning(
    g: &Geometry,
    e_mu: f64,
    e_nu: f64,
    omega_delta_nominal: f64,
    t_end: f64,
    opts: &ProtocolOptions,
) -> Result<Calibration> {
    calibrate_detuning_in(g, e_mu, e_nu, omega_delta_nominal, CALIBRATION_WINDOW, t_end, opts)
}

/// [`calibrate_detuning`] with an explicit relative scan half-width.
pub fn calibrate_detuning_in(
    g: &Geometry,
    e_mu: f64,
    e_nu: f64,
    omega_delta_nominal: f64,
    window: f64,
    t_end: f64,
    opts: &ProtocolOptions,
) -> Result<Calibration> {
    calibrate_detuning_with(
        g,
        e_mu,
        e_nu,
        omega_delta_nominal,
        window,
        CALIBRATION_GRID,
        CALIBRATION_RESOLUTION,
        t_end,
        opts,
    )
}

/// [`calibrate_detuning_in`] with an explicit grid size and resolution.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_detuning_with(
    g: &Geometry,
    e_mu: f64,
    e_nu: f64,
    omega_delta_nominal: f64,
    window: f64,
    points: usize,
    resolution: f64,
    t_end: f64,
    opts: &ProtocolOptions,
) -> Result<Calibration> {
    let c = coupling_matrices(g)?;
    let sp = spectral_params(&c)?;
    let ode = opts.ode();
    calibrate_scan_with(
        |w| {
            let drive = DriveSpec::for_geometry(rotation_tones(&sp, e_mu, e_nu, w), g, opts.wavevector)?;
            let tr = rotation_transfer(&c, &drive, opts.decay)?;
            let inv = tr.first_inversion(t_end, &ode)?;
            Ok(fidelity(&inv.psi, &tr.target)?.conditional)
        },
        omega_delta_nominal,
        window,
        points,
        resolution,
    )
}

#[derive(Clone, Debug)]
pub struct ReadoutResult {
    pub logical: u8,
    pub times: Vec<f64>,
    /// Accumulated emission probability 1 − tr ρ₀ per record.
    pub emission: Vec<f64>,
    pub trajectory: Trajectory,
    pub tone: Tone,
}

impl ReadoutResult {
    pub fn final_emission(&self) -> f64 {
        *self.emission.last().unwrap_or(&0.0)
    }
}

/// Which readout transition the tone is resonant with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutTransition {
    /// c → g: fluoresces for logical 1.
    #[default]
    CG,
    /// b → g: fluoresces for logical 0.
    BG,
}

/// Lindblad evolution of logical 0 (level b) or 1 (level c) under the
/// readout tone; reports the accumulated emission probability.
pub fn readout_fluorescence(
    g: &Geometry,
    e_mu: f64,
    logical: u8,
    transition: ReadoutTransition,
    t_end: f64,
    opts: &ProtocolOptions,
) -> Result<ReadoutResult> {
    let c = coupling_matrices(g)?;
    let sp = spectral_params(&c)?;
    let detuning = match transition {
        ReadoutTransition::CG => sp.readout_c_frequency(),
        ReadoutTransition::BG => sp.readout_b_frequency(),
    };
    let tone = Tone { rabi: e_mu, detuning };
    let drive = DriveSpec::for_geometry(vec![tone], g, opts.wavevector)?;
    let label = match logical {
        0 => 'b',
        1 => 'c',
        _ => return Err(Error::InvalidParameter(format!("logical value must be 0 or 1, got {logical}"))),
    };
    let basis = collective_eigenbasis(&c);
    let psi = basis.state(label).normalized()?;
    let eo = EvolveOptions { rtol: opts.rtol, atol: opts.atol, decay: Decay::Include, samples: opts.samples };
    let trajectory = evolve_lindblad(&psi.density(), &c, &drive, t_end, &eo)?;
    let emission = trajectory.no_jump_probability.iter().map(|p| 1.0 - p).collect();
    Ok(ReadoutResult { logical, times: trajectory.times.clone(), emission, trajectory, tone })
}

/// Emission contrast between the bright and the dark logical state.
pub fn readout_contrast(bright: &ReadoutResult, dark: &ReadoutResult) -> f64 {
    bright.final_emission() - dark.final_emission()
}

#[derive(Clone, Debug, Serialize)]
pub struct CphaseResult {
    /// Labels of |00⟩_L, |01⟩_L, |10⟩_L, |11⟩_L.
    pub labels: [char; 4],
    /// Phases relative to free evolution, in (−π, π].
    pub phases: [f64; 4],
    /// Remaining probability in the starting level after the pulse.
    pub retention: [f64; 4],
    /// φ₁₁ − φ₁₀ − φ₀₁ + φ₀₀ wrapped to (−π, π].
    pub conditional_phase: f64,
    /// Population left in level l when starting from f.
    pub leakage_l: f64,
    pub leaky: bool,
    /// Largest norm loss over the four runs.
    pub norm_loss: f64,
    pub duration: f64,
    /// |⟨l|H_drive|f⟩| for the chosen amplitude.
    pub coupling_fl: f64,
    pub tone: Tone,
}

pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// Four-emitter CPHASE: a square pulse of amplitude `e` detuned by
/// `detuning_offset` from the f → l transition, lasting one generalised Rabi
/// period of that transition. Logical encoding |00⟩ = c, |01⟩ = b, |10⟩ = g,
/// |11⟩ = f.
pub fn cphase4(g4: &Geometry, e: f64, detuning_offset: f64, opts: &ProtocolOptions) -> Result<CphaseResult> {
    if g4.n() != 4 {
        return Err(Error::InvalidParameter(format!("CPHASE needs 4 emitters, got {}", g4.n())));
    }
    let c = coupling_matrices(g4)?;
    let basis = collective_eigenbasis_with(&c, opts.decay);
    let (f, l) = (basis.level('f'), basis.level('l'));
    let unit = DriveSpec::for_geometry(vec![Tone { rabi: 1.0, detuning: 0.0 }], g4, opts.wavevector)?;
    let v = unit.raising_operator();
    let coupling_fl = (l.right.adjoint() * &v * &f.right)[0].norm() * e;
    let tone = Tone { rabi: e, detuning: l.energy - f.energy + detuning_offset };
    let generalized = (4.0 * coupling_fl * coupling_fl + detuning_offset * detuning_offset).sqrt();
    let duration = if generalized > 0.0 { std::f64::consts::TAU / generalized } else { 0.0 };
    let labels = ['c', 'b', 'g', 'f'];
    let mut phases = [0.0; 4];
    let mut retention = [0.0; 4];
    let mut norm_loss: f64 = 0.0;
    let mut leakage_l = 0.0;
    if duration > 0.0 {
        let drive = DriveSpec::for_geometry(vec![tone], g4, opts.wavevector)?;
        let sys = NoJumpSystem::new(&c, &drive, opts.decay)?;
        for (k, label) in labels.iter().enumerate() {
            let lvl = basis.level(*label);
            let psi0 = StateVector(lvl.right.clone());
            let (y, _, _) = sys.run(&psi0, duration, &opts.ode(), |_| ControlFlow::Continue(()))?;
            let y = DVector::from_vec(y);
            let amp = lvl.right.dotc(&y) * C::from_polar(1.0, lvl.energy * duration);
            phases[k] = wrap_phase(amp.arg());
            retention[k] = amp.norm_sqr();
            norm_loss = norm_loss.max(1.0 - y.norm_squared());
            if *label == 'f' {
                leakage_l = l.right.dotc(&y).norm_sqr();
            }
        }
    }
    let conditional_phase = wrap_phase(phases[3] - phases[2] - phases[1] + phases[0]);
    Ok(CphaseResult {
        labels,
        phases,
        retention,
        conditional_phase,
        leakage_l,
        leaky: leakage_l > CPHASE_LEAKAGE_THRESHOLD,
        norm_loss,
        duration,
        coupling_fl,
        tone,
    })
}

/// Dipole matrix element |⟨to|V|from⟩| of the unit-amplitude drive.
pub fn transition_element(basis: &CollectiveBasis, drive: &DriveSpec, from: char, to: char) -> f64 {
    let v: DMatrix<C> = drive.scaled(0.0).raising_operator();
    (basis.level(to).right.adjoint() * v * &basis.level(from).right)[0].norm()
}
