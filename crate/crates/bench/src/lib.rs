//! Fixtures shared by the benchmarks.

use dfsim_core::{coupling_matrices, CouplingSet, Geometry};

/// Couplings of the three-emitter preparation array.
pub fn prep_couplings() -> CouplingSet {
    coupling_matrices(&Geometry::linear(0.5, 3, 0.0).expect("valid geometry")).expect("valid couplings")
}

/// Couplings of the three-emitter rotation array.
pub fn rotation_couplings() -> CouplingSet {
    coupling_matrices(&Geometry::linear(0.15, 3, std::f64::consts::FRAC_PI_2).expect("valid geometry"))
        .expect("valid couplings")
}
