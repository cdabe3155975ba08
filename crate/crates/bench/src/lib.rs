//! Fixtures shared by the benchmarks.

use bpbeta::ensembles::{generate, EnsembleSpec};
use bpbeta::LinearSystem;

pub const SEED: u64 = 20_240_611;

/// ER instance with `m = n / 4` equations of mean degree 4.
pub fn er_instance(n: usize) -> LinearSystem {
    generate(&EnsembleSpec::er(n, n / 4, 4.0, SEED)).expect("generator accepts these sizes")
}
