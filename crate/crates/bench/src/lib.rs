//! Shared inputs for the benchmarks.

use fpqr::{generate_simulation, ErrorLaw, Scheme, SimulationSpec};

pub use fpqr::eval::SimulatedData;

/// First repetition of the sparse single-response design (100×100).
pub fn sim1() -> SimulatedData {
    let spec = SimulationSpec::new(Scheme::Sim1, ErrorLaw::Chi2_3, 1, 7).expect("valid spec");
    generate_simulation(&spec, 0).expect("generation succeeds")
}
