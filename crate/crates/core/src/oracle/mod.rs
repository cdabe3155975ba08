//! Ground truth: hit-and-run sampling, empirical marginals, and exact volumes
//! of small polytopes.

mod chart;
mod har;
mod hist;
mod volume;

pub use chart::{chart, PolytopeChart};
pub use har::{
    chain_histograms, default_steps, har_step, sample, sample_with_burn_in, SampleSet, MAX_CHORD_RETRIES, MIN_CHORD,
};
pub use hist::{empirical_marginal, histogram, l1_distance, uniform_edges, Histogram};
pub use volume::{exact_log_volume, exact_volume_small, rejection_volume, DEFAULT_MAX_DIM};

#[cfg(test)]
mod tests;
