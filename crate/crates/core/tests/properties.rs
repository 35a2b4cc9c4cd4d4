use dfsim_core::dynamics::States;
use dfsim_core::hilbert::free_hamiltonian;
use dfsim_core::{
    collective_eigenbasis, coupling_matrices, evolve_lindblad, evolve_nojump, fidelity, Decay, DriveSpec, EvolveOptions,
    Geometry, StateVector, Tone,
};
use proptest::prelude::*;

fn drive(rabi: f64, detuning: f64, kr: f64) -> DriveSpec {
    DriveSpec::new(vec![Tone { rabi, detuning }], vec![0.0, kr, 2.0 * kr]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn nojump_norm_never_grows(
        xi in 0.1f64..1.0,
        alpha in 0.0f64..3.1,
        rabi in 0.0f64..3.0,
        detuning in -5.0f64..5.0,
    ) {
        let c = coupling_matrices(&Geometry::linear(xi, 3, alpha).unwrap()).unwrap();
        let psi = StateVector::superposition(&[("000", 0.6), ("100", 0.5), ("011", 0.4), ("111", 0.2)]).normalized().unwrap();
        let t = evolve_nojump(&psi, &c, &drive(rabi, detuning, xi), 2.0, &EvolveOptions { samples: 41, ..Default::default() }).unwrap();
        prop_assert!(t.norms.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        prop_assert!(t.norms.iter().all(|&n| n <= 1.0 + 1e-10));
    }

    #[test]
    fn lindblad_keeps_trace_and_positivity(
        xi in 0.15f64..1.0,
        alpha in 0.0f64..3.1,
        rabi in 0.0f64..3.0,
        detuning in -3.0f64..3.0,
    ) {
        let c = coupling_matrices(&Geometry::linear(xi, 3, alpha).unwrap()).unwrap();
        let rho0 = StateVector::product("010").density();
        let t = evolve_lindblad(&rho0, &c, &drive(rabi, detuning, xi), 2.0, &EvolveOptions { samples: 11, ..Default::default() }).unwrap();
        prop_assert!(t.norms.iter().all(|n| (n - 1.0).abs() < 1e-9));
        prop_assert!(!t.positivity_warning, "min eigenvalue {}", t.min_eigenvalue);
        let States::Mixed(rhos) = &t.states else { unreachable!() };
        for r in rhos {
            prop_assert!((r - r.adjoint()).norm() < 1e-9);
        }
        for p in &t.populations {
            prop_assert!(p.iter().all(|&x| x > -1e-9));
        }
    }

    #[test]
    fn eigenbasis_rebuilds_hamiltonian(xi in 0.05f64..2.0, alpha in 0.0f64..3.1, n in 3usize..=4) {
        let c = coupling_matrices(&Geometry::linear(xi, n, alpha).unwrap()).unwrap();
        let h = free_hamiltonian(&c, Decay::Include);
        let basis = collective_eigenbasis(&c);
        prop_assert!(basis.biorthogonal());
        prop_assert!((basis.reconstruct() - &h).norm() <= 1e-9 * h.norm().max(1.0));
        prop_assert!(basis.labels().iter().all(|&l| basis.level(l).linewidth >= -1e-9));
    }

    #[test]
    fn fidelity_is_bounded(a in -1.0f64..1.0, b in -1.0f64..1.0, shrink in 0.1f64..1.0) {
        prop_assume!(a.abs() + b.abs() > 1e-3);
        let target = StateVector::superposition(&[("100", 1.0), ("010", -1.0)]).normalized().unwrap();
        let raw = StateVector::superposition(&[("100", a), ("001", b)]).normalized().unwrap();
        let psi = StateVector::from_vector(raw.amplitudes() * dfsim_core::Complex64::from(shrink.sqrt()));
        let f = fidelity(&psi, &target).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f.conditional));
        prop_assert!(f.raw <= f.conditional + 1e-12);
        prop_assert!((f.raw - shrink * f.conditional).abs() < 1e-12);
    }
}
