//! Random instance ensembles and the experiment drivers built on them.

mod benchmark;
mod convergence;
mod generators;
mod knockdown;
mod rbc;
pub mod tomography;

pub use benchmark::{
    benchmark_volumes, compare_marginals, instance_seed, mean_relative_error, BenchmarkConfig, ExperimentReport,
    MarginalComparison, VolumeRecord,
};
pub use convergence::{convergence_scan, loglog_slope, sweep_timing, ConvergencePoint, SweepTiming};
pub use generators::{gen_er, gen_scale_free, gen_small_world, generate, gini, EnsembleKind, EnsembleSpec};
pub use knockdown::{
    knockdown_scan, knocked_bounds, spearman, KnockdownConfig, KnockdownEntry, KnockdownReport, KnockdownRule,
};
pub use rbc::rbc_network;
pub use tomography::{
    abilene_like, read_routing_csv, read_traffic_csv, synthetic_traffic, tomography_infer, Routing, SyntheticConfig,
    TomographyConfig, TomographyReport, Topology, TrafficSeries, UpperBoundRule,
};
