//! Collective dynamics of small arrays of dipole-coupled two-level emitters.
//!
//! The crate builds the dipole-dipole coupled Hamiltonian of three or four
//! identical emitters, its collective eigenbasis and Lindblad dissipator, and
//! on top of that the decoherence-free qubit protocols: entangled-state
//! preparation, Raman rotation between the two long-lived collective levels,
//! fluorescence readout, a four-emitter controlled-phase pulse, and
//! probabilistic cluster-chain growth.
//!
//! Units: rates and energies in units of the single-emitter decay rate γ
//! (γ = 1), times in γ⁻¹, lengths in units of the resonant wavelength λ₀.
//! All dynamics run in the frame rotating at the bare transition frequency.

pub mod cluster;
pub mod coupling;
pub mod dynamics;
mod error;
pub mod export;
pub mod geometry;
pub mod hilbert;
mod linalg;
pub mod ode;
pub mod protocols;
pub mod robustness;

pub use num_complex::Complex64;

pub use coupling::{coupling_matrices, spectral_params, xi_coefficient, CouplingSet, SpectralParams};
pub use dynamics::{
    build_h_eff, evolve_lindblad, evolve_nojump, jump_operators, Decay, DriveSpec, EvolveOptions,
    JumpSet, Tone, Trajectory, Wavevector,
};
pub use error::{Error, Result};
pub use geometry::{linear_array, sample_disorder, DisorderMode, DisorderSpec, Geometry};
pub use hilbert::{collective_eigenbasis, dfs4_states, fidelity, CollectiveBasis, Fidelity, StateVector};
pub use cluster::{grow_chain, verify_cluster_state_small, ClusterCheck, GrowthRun, GrowthSummary};
pub use export::{Cell, Table};
pub use protocols::{
    calibrate_detuning, cphase4, prepare_b, readout_coupling, readout_fluorescence, rotate_logical, Calibration,
    CphaseResult, ProtocolOptions, ProtocolResult, ReadoutResult, ReadoutTransition,
};
pub use robustness::{
    merit_curve_prep, merit_curve_rotation, sweep, tolerance_table, BaseScenario, MeritPoint, SweepAxis,
    SweepProtocol, SweepResult, SweepSpec, TableSpec, Timing, ToleranceTable,
};
