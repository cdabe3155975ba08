use std::io::Write;

use rand::Rng;
use serde::Serialize;

use super::chart::PolytopeChart;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Retries before a degenerate chord is reported.
pub const MAX_CHORD_RETRIES: usize = 100;
/// Chords shorter than this count as degenerate.
pub const MIN_CHORD: f64 = 1e-12;

/// Total hit-and-run steps used by default for `n` variables.
pub fn default_steps(n_vars: usize) -> usize {
    50 * n_vars * n_vars
}

fn step_into<R: Rng + ?Sized>(chart: &PolytopeChart, x: &mut [f64], d: &mut [f64], rng: &mut R) -> Result<()> {
    if chart.basis.is_empty() {
        return Ok(());
    }
    for _ in 0..MAX_CHORD_RETRIES {
        chart.direction(rng, d);
        let (lo, hi) = chart.chord(x, d);
        if hi - lo >= MIN_CHORD {
            let t = rng.random_range(lo..hi);
            for i in 0..x.len() {
                x[i] = (x[i] + t * d[i]).clamp(chart.lower[i], chart.upper[i]);
            }
            return Ok(());
        }
    }
    Err(Error::ZeroChord {
        retries: MAX_CHORD_RETRIES,
    })
}

/// One hit-and-run move: uniform point on the chord through `x` along a random
/// null-space direction.
pub fn har_step<R: Rng + ?Sized>(chart: &PolytopeChart, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    let mut d = vec![0.0; x.len()];
    step_into(chart, &mut y, &mut d, rng)?;
    Ok(y)
}

/// Draws from a hit-and-run chain, one row per kept state.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSet {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub stride: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl SampleSet {
    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, var: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[var]).collect()
    }

    pub fn mean(&self, var: usize) -> f64 {
        self.rows.iter().map(|r| r[var]).sum::<f64>() / self.rows.len() as f64
    }

    /// CSV with one column per variable and one row per draw.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.names)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(Error::from)
    }
}

/// Runs `burn_in + n_samples * stride` steps from the chart's interior point,
/// keeping every `stride`-th state after burn-in.
pub fn sample_with_burn_in(
    chart: &PolytopeChart,
    names: Vec<String>,
    n_samples: usize,
    stride: usize,
    burn_in: usize,
    seed: u64,
) -> Result<SampleSet> {
    if stride == 0 {
        return Err(Error::Parameter("stride must be positive".into()));
    }
    let mut rng = stream_rng(seed, Stream::Mcmc);
    let mut x = chart.point.clone();
    let mut d = vec![0.0; x.len()];
    for _ in 0..burn_in {
        step_into(chart, &mut x, &mut d, &mut rng)?;
    }
    let mut rows = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        for _ in 0..stride {
            step_into(chart, &mut x, &mut d, &mut rng)?;
        }
        rows.push(x.clone());
    }
    Ok(SampleSet {
        names,
        rows,
        stride,
        burn_in,
        seed,
    })
}

/// [`sample_with_burn_in`] without burn-in.
pub fn sample(
    chart: &PolytopeChart,
    names: Vec<String>,
    n_samples: usize,
    stride: usize,
    seed: u64,
) -> Result<SampleSet> {
    sample_with_burn_in(chart, names, n_samples, stride, 0, seed)
}

/// Streams a chain and bins every `stride`-th state of each variable into
/// `edges[var]`, without storing the draws.
pub fn chain_histograms(
    chart: &PolytopeChart,
    edges: &[Vec<f64>],
    steps: usize,
    stride: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<super::Histogram>> {
    if stride == 0 {
        return Err(Error::Parameter("stride must be positive".into()));
    }
    let mut rng = stream_rng(seed, Stream::Mcmc);
    let mut x = chart.point.clone();
    let mut d = vec![0.0; x.len()];
    for _ in 0..burn_in {
        step_into(chart, &mut x, &mut d, &mut rng)?;
    }
    let mut counts: Vec<Vec<usize>> = edges.iter().map(|e| vec![0; e.len() - 1]).collect();
    let mut kept = 0usize;
    for step in 1..=steps {
        step_into(chart, &mut x, &mut d, &mut rng)?;
        if step % stride == 0 {
            kept += 1;
            for (var, e) in edges.iter().enumerate() {
                let bins = e.len() - 1;
                let k = e[1..bins].partition_point(|&b| b <= x[var]);
                counts[var][k] += 1;
            }
        }
    }
    let total = kept.max(1) as f64;
    Ok(edges
        .iter()
        .zip(counts)
        .map(|(e, c)| super::Histogram {
            edges: e.clone(),
            mass: c.into_iter().map(|v| v as f64 / total).collect(),
        })
        .collect())
}
