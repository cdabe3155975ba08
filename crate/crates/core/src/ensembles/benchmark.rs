use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{generate, EnsembleSpec};
use crate::bp::{solve, BpConfig, Solution};
use crate::error::{Error, Result};
use crate::model::LinearSystem;
use crate::oracle::{chain_histograms, chart, exact_log_volume, l1_distance, uniform_edges};

/// Seed of instance `index` in an ensemble with base seed `base`.
pub fn instance_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// `(1/Q) sum_i |V_x^i - V_y^i| / V_x^i`, with `x` the reference method.
pub fn mean_relative_error(reference: &[f64], other: &[f64]) -> f64 {
    assert_eq!(reference.len(), other.len(), "paired volumes");
    let q = reference.len() as f64;
    reference.iter().zip(other).map(|(x, y)| (x - y).abs() / x).sum::<f64>() / q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub spec: EnsembleSpec,
    pub instances: usize,
    pub bp: BpConfig,
    /// Compare against the exact small-dimension volume.
    pub oracle: bool,
    pub max_dim: usize,
    /// Hit-and-run steps per instance for the marginal comparison; `None` skips it.
    pub mcmc_steps: Option<usize>,
    pub bins: usize,
}

/// One instance of a volume benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeRecord {
    pub index: usize,
    pub seed: u64,
    pub n_edges: usize,
    pub bp_log_volume: Option<f64>,
    pub bp_volume: Option<f64>,
    pub bp_converged: bool,
    pub bp_iterations: usize,
    pub exact_volume: Option<f64>,
    /// Mean per-variable L1 distance between MCMC and BP histograms.
    pub mcmc_l1: Option<f64>,
    /// Why the instance is left out of the error statistic.
    pub excluded: Option<String>,
}

/// Table of per-instance results with the summary statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: BenchmarkConfig,
    pub instances: Vec<VolumeRecord>,
    /// Mean relative error of BP volumes with respect to exact volumes.
    pub epsilon: Option<f64>,
    pub n_used: usize,
    pub n_nonconverged: usize,
    pub n_excluded: usize,
    pub mean_mcmc_l1: Option<f64>,
}

/// Per-variable L1 distances between BP beliefs and hit-and-run histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalComparison {
    pub per_var: Vec<f64>,
    pub mean: f64,
}

/// Bins each variable's tightened box into `bins` equal bins, runs `steps`
/// hit-and-run steps (keeping every `stride`-th state) and compares the bin
/// probabilities with those of the BP beliefs.
pub fn compare_marginals(
    sys: &LinearSystem,
    solution: &Solution,
    steps: usize,
    stride: usize,
    bins: usize,
    seed: u64,
) -> Result<MarginalComparison> {
    let c = chart(sys)?;
    let edges: Vec<Vec<f64>> = (0..sys.n_vars())
        .map(|i| uniform_edges(c.lower[i], c.upper[i], bins))
        .collect();
    let hist = chain_histograms(&c, &edges, steps, stride, steps / 10, seed)?;
    let per_var: Vec<f64> = hist
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let m = solution.marginals.get(i);
            let q = if h.edges.len() == 2 && h.edges[0] == h.edges[1] {
                vec![1.0]
            } else {
                let mut q = m.bin_masses(&h.edges);
                // Point beliefs inside a nondegenerate box land in one bin.
                if m.is_point() {
                    q = h.edges.windows(2).map(|_| 0.0).collect();
                    let k = h.edges[1..h.edges.len() - 1].partition_point(|&e| e <= m.mean);
                    q[k] = 1.0;
                }
                q
            };
            l1_distance(&h.mass, &q)
        })
        .collect();
    let mean = per_var.iter().sum::<f64>() / per_var.len().max(1) as f64;
    Ok(MarginalComparison { per_var, mean })
}

fn run_instance(cfg: &BenchmarkConfig, index: usize) -> VolumeRecord {
    let seed = instance_seed(cfg.spec.seed, index);
    let mut rec = VolumeRecord {
        index,
        seed,
        n_edges: 0,
        bp_log_volume: None,
        bp_volume: None,
        bp_converged: false,
        bp_iterations: 0,
        exact_volume: None,
        mcmc_l1: None,
        excluded: None,
    };
    let sys = match generate(&cfg.spec.with_seed(seed)) {
        Ok(s) => s,
        Err(e) => {
            rec.excluded = Some(format!("generation failed: {e}"));
            return rec;
        }
    };
    rec.n_edges = sys.entries().len();
    let bp = BpConfig { seed, ..cfg.bp };
    let solution = match solve(&sys, &bp) {
        Ok(s) => s,
        Err(e) => {
            rec.excluded = Some(format!("bp failed: {e}"));
            return rec;
        }
    };
    rec.bp_converged = solution.entropy.converged;
    rec.bp_iterations = solution.entropy.iterations;
    rec.bp_log_volume = Some(solution.entropy.h);
    rec.bp_volume = Some(solution.entropy.h.exp());
    if cfg.oracle {
        match exact_log_volume(&sys, cfg.max_dim) {
            Ok(lv) if lv.is_finite() => rec.exact_volume = Some(lv.exp()),
            Ok(_) => rec.excluded = Some("exact volume is zero".into()),
            Err(Error::RankDeficient { rank, rows }) => {
                rec.excluded = Some(format!("rank deficient ({rank} < {rows})"))
            }
            Err(e) => rec.excluded = Some(format!("oracle failed: {e}")),
        }
    }
    if let Some(steps) = cfg.mcmc_steps {
        let stride = (steps / 10_000).max(1);
        match compare_marginals(&sys, &solution, steps, stride, cfg.bins, seed) {
            Ok(c) => rec.mcmc_l1 = Some(c.mean),
            Err(e) => rec.excluded = Some(format!("mcmc failed: {e}")),
        }
    }
    if rec.excluded.is_none() && !rec.bp_converged {
        rec.excluded = Some("bp did not converge".into());
    }
    rec
}

/// Runs `instances` random instances in parallel and summarizes them.
pub fn benchmark_volumes(cfg: &BenchmarkConfig) -> ExperimentReport {
    let instances: Vec<VolumeRecord> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| run_instance(cfg, i))
        .collect();
    let used: Vec<&VolumeRecord> = instances.iter().filter(|r| r.excluded.is_none()).collect();
    let epsilon = if cfg.oracle && !used.is_empty() {
        let exact: Vec<f64> = used.iter().map(|r| r.exact_volume.expect("oracle volume")).collect();
        let bp: Vec<f64> = used.iter().map(|r| r.bp_volume.expect("bp volume")).collect();
        Some(mean_relative_error(&exact, &bp))
    } else {
        None
    };
    let l1: Vec<f64> = used.iter().filter_map(|r| r.mcmc_l1).collect();
    ExperimentReport {
        config: *cfg,
        n_used: used.len(),
        n_nonconverged: instances
            .iter()
            .filter(|r| r.bp_volume.is_some() && !r.bp_converged)
            .count(),
        n_excluded: instances.len() - used.len(),
        epsilon,
        mean_mcmc_l1: (!l1.is_empty()).then(|| l1.iter().sum::<f64>() / l1.len() as f64),
        instances,
    }
}
