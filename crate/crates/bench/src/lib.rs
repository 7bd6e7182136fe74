//! Fixed inputs shared by the benchmarks.

use qlimits_core::randomgen::{random_density_hs, random_problem};
use qlimits_core::{EstimationProblem, HermitianMatrix, LwurSpec, SeededRng};

pub const SEED: u64 = 2024;

pub fn problem(d: usize) -> EstimationProblem {
    random_problem(d, &mut SeededRng::new(SEED, d as u64)).expect("random problem")
}

pub fn hermitian(d: usize) -> HermitianMatrix {
    random_density_hs(d, &mut SeededRng::new(SEED, 100 + d as u64))
        .expect("random density matrix")
        .hermitian()
        .clone()
}

/// An intermediate incompatibility, so the numeric search path is taken.
pub fn lwur_spec() -> LwurSpec {
    LwurSpec::new(1.3, 0.7, 0.6).expect("valid spec")
}
