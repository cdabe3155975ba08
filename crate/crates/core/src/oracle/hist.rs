use serde::Serialize;

use super::har::SampleSet;

/// Normalized histogram: `mass` sums to 1 over bins delimited by `edges`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn densities(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .zip(&self.mass)
            .map(|(w, m)| if w[1] > w[0] { m / (w[1] - w[0]) } else { f64::INFINITY })
            .collect()
    }
}

/// `bins + 1` evenly spaced edges on `[lo, hi]`; a single bin when `lo == hi`.
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo, hi];
    }
    let bins = bins.max(1);
    (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect()
}

/// Histogram of `values` on `edges`; values outside are clamped to the end bins.
pub fn histogram(values: &[f64], edges: &[f64]) -> Histogram {
    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = edges[1..bins].partition_point(|&e| e <= v);
        counts[k] += 1;
    }
    let total = values.len().max(1) as f64;
    Histogram {
        edges: edges.to_vec(),
        mass: counts.into_iter().map(|c| c as f64 / total).collect(),
    }
}

/// Histogram of one variable over `[lo, hi]` with `bins` equal bins.
pub fn empirical_marginal(samples: &SampleSet, var: usize, lo: f64, hi: f64, bins: usize) -> Histogram {
    histogram(&samples.column(var), &uniform_edges(lo, hi, bins))
}

/// `sum_k |p_k - q_k|` between two bin-probability vectors.
pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "histograms must share bins");
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_and_normalization() {
        let h = histogram(&[0.0, 0.1, 0.5, 0.99, 1.0], &uniform_edges(0.0, 1.0, 2));
        assert_eq!(h.mass, vec![0.4, 0.6]);
        assert_eq!(h.densities(), vec![0.8, 1.2]);
    }

    #[test]
    fn point_mass_uses_one_bin() {
        let h = histogram(&[0.3, 0.3], &uniform_edges(0.3, 0.3, 10));
        assert_eq!(h.mass, vec![1.0]);
    }

    #[test]
    fn l1_of_disjoint_masses_is_two() {
        assert_eq!(l1_distance(&[1.0, 0.0], &[0.0, 1.0]), 2.0);
    }
}
