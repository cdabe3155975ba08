use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::benchmark::instance_seed;
use super::generators::{gen_er, EnsembleSpec};
use crate::bp::{BpConfig, BpState};
use crate::error::Result;

/// Fraction of random ER instances on which BP converged, at one mean degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub mean_degree: f64,
    pub trials: usize,
    pub converged: usize,
    pub probability: f64,
    /// Mean sweeps over converged trials.
    pub mean_iterations: f64,
}

/// For each `k` in `mean_degrees`, runs BP on `trials` ER instances with
/// `n_vars` variables and `n_eqs` equations and counts convergence within
/// `bp.max_iter` sweeps. Failures (e.g. contradictions) count as non-convergence.
pub fn convergence_scan(
    n_vars: usize,
    n_eqs: usize,
    mean_degrees: &[f64],
    trials: usize,
    bp: &BpConfig,
    seed: u64,
) -> Vec<ConvergencePoint> {
    let jobs: Vec<(usize, usize)> = (0..mean_degrees.len())
        .flat_map(|k| (0..trials).map(move |t| (k, t)))
        .collect();
    let outcomes: Vec<Option<usize>> = jobs
        .par_iter()
        .map(|&(k, t)| {
            let s = instance_seed(seed, k * trials + t);
            let sys = gen_er(&EnsembleSpec::er(n_vars, n_eqs, mean_degrees[k], s)).ok()?;
            let cfg = BpConfig { seed: s, ..*bp };
            let mut state = BpState::init(&sys, &cfg).ok()?;
            state.run(cfg.max_iter, cfg.tol).ok()?;
            state.converged().then(|| state.iteration())
        })
        .collect();
    mean_degrees
        .iter()
        .enumerate()
        .map(|(k, &mean_degree)| {
            let runs = &outcomes[k * trials..(k + 1) * trials];
            let iters: Vec<usize> = runs.iter().flatten().copied().collect();
            ConvergencePoint {
                mean_degree,
                trials,
                converged: iters.len(),
                probability: iters.len() as f64 / trials.max(1) as f64,
                mean_iterations: if iters.is_empty() {
                    f64::NAN
                } else {
                    iters.iter().sum::<usize>() as f64 / iters.len() as f64
                },
            }
        })
        .collect()
}

/// Wall time of BP sweeps on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTiming {
    pub n_vars: usize,
    pub n_eqs: usize,
    pub n_edges: usize,
    pub sweeps: usize,
    pub seconds_per_sweep: f64,
}

/// Times `sweeps` sweeps (after one warm-up sweep) on an ER instance.
pub fn sweep_timing(spec: &EnsembleSpec, sweeps: usize, bp: &BpConfig) -> Result<SweepTiming> {
    let sys = gen_er(spec)?;
    let mut state = BpState::init(&sys, bp)?;
    state.sweep()?;
    let start = Instant::now();
    for _ in 0..sweeps {
        state.sweep()?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(SweepTiming {
        n_vars: spec.n_vars,
        n_eqs: spec.n_eqs,
        n_edges: state.graph().n_edges(),
        sweeps,
        seconds_per_sweep: elapsed / sweeps.max(1) as f64,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
