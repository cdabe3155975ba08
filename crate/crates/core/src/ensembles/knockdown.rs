use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{solve, solve_warm, BpConfig};
use crate::error::{Error, Result};
use crate::model::LinearSystem;

/// How a knock-down shrinks the box of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnockdownRule {
    /// Scale `b_i`, and also `a_i` when it is negative.
    #[default]
    Symmetric,
    /// Scale `b_i` only.
    UpperOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnockdownConfig {
    pub factor: f64,
    pub rule: KnockdownRule,
    /// Start each knock-down from the wild-type messages.
    pub warm_start: bool,
    /// Exact bounds are on by default here: a knock-down only moves one box edge,
    /// and loose boxes elsewhere would swamp the change.
    pub bp: BpConfig,
}

impl Default for KnockdownConfig {
    fn default() -> Self {
        Self {
            factor: 0.5,
            rule: KnockdownRule::Symmetric,
            warm_start: false,
            bp: BpConfig {
                exact_bounds: true,
                ..BpConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnockdownEntry {
    pub var: usize,
    pub name: String,
    pub log_volume: Option<f64>,
    /// `H_wild - H_knockdown`.
    pub delta_h: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnockdownReport {
    pub config: KnockdownConfig,
    pub wild_log_volume: f64,
    pub wild_iterations: usize,
    /// One entry per variable, in variable order.
    pub entries: Vec<KnockdownEntry>,
    /// Variables with a converged knock-down, by decreasing `delta_h`.
    pub ranking: Vec<usize>,
}

/// Bounds of variable `i` after a knock-down.
pub fn knocked_bounds(sys: &LinearSystem, i: usize, factor: f64, rule: KnockdownRule) -> (f64, f64) {
    let (a, b) = (sys.lower()[i], sys.upper()[i]);
    let lower = match rule {
        KnockdownRule::Symmetric if a < 0.0 => a * factor,
        _ => a,
    };
    (lower, b * factor)
}

/// Shrinks each variable's box in turn and records the drop in log-volume.
pub fn knockdown_scan(sys: &LinearSystem, cfg: &KnockdownConfig) -> Result<KnockdownReport> {
    if !(cfg.factor > 0.0) {
        return Err(Error::Parameter(format!(
            "knock-down factor {} must be positive",
            cfg.factor
        )));
    }
    let wild = solve(sys, &cfg.bp)?;
    if !wild.entropy.converged {
        return Err(Error::Parameter(format!(
            "wild-type BP did not converge in {} sweeps",
            wild.entropy.iterations
        )));
    }
    let h_wild = wild.entropy.h;
    let entries: Vec<KnockdownEntry> = (0..sys.n_vars())
        .into_par_iter()
        .map(|i| {
            let mut entry = KnockdownEntry {
                var: i,
                name: sys.var_name(i),
                log_volume: None,
                delta_h: None,
                converged: false,
                iterations: 0,
                error: None,
            };
            let (lo, hi) = knocked_bounds(sys, i, cfg.factor, cfg.rule);
            if lo == sys.lower()[i] && hi == sys.upper()[i] {
                // Same polytope: the wild-type answer is exact for it.
                entry.log_volume = Some(h_wild);
                entry.delta_h = Some(0.0);
                entry.converged = true;
                entry.iterations = wild.entropy.iterations;
                return entry;
            }
            let mut lower = sys.lower().to_vec();
            let mut upper = sys.upper().to_vec();
            lower[i] = lo;
            upper[i] = hi;
            let outcome = sys.with_bounds(lower, upper).and_then(|ko| {
                if cfg.warm_start {
                    solve_warm(&ko, &cfg.bp, &wild.state)
                } else {
                    solve(&ko, &cfg.bp)
                }
            });
            match outcome {
                Ok(sol) => {
                    entry.log_volume = Some(sol.entropy.h);
                    entry.delta_h = Some(h_wild - sol.entropy.h);
                    entry.converged = sol.entropy.converged;
                    entry.iterations = sol.entropy.iterations;
                }
                Err(e) => entry.error = Some(e.to_string()),
            }
            entry
        })
        .collect();
    let mut ranking: Vec<usize> = entries
        .iter()
        .filter(|e| e.converged && e.delta_h.is_some())
        .map(|e| e.var)
        .collect();
    ranking.sort_by(|&a, &b| {
        entries[b]
            .delta_h
            .unwrap()
            .total_cmp(&entries[a].delta_h.unwrap())
            .then(a.cmp(&b))
    });
    Ok(KnockdownReport {
        config: *cfg,
        wild_log_volume: h_wild,
        wild_iterations: wild.entropy.iterations,
        entries,
        ranking,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut j = k;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[k]] {
            j += 1;
        }
        let avg = (k + j) as f64 / 2.0 + 1.0;
        for &t in &idx[k..=j] {
            r[t] = avg;
        }
        k = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples");
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Term;

    #[test]
    fn spearman_by_hand() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // Ties share the average rank: ranks (1.5, 1.5, 3) vs (1, 2, 3).
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
        assert!((r - 0.8660254037844386).abs() < 1e-12);
    }

    #[test]
    fn symmetric_rule_scales_negative_lower_bounds() {
        let s = LinearSystem::new(
            2,
            vec![
                Term {
                    eq: 0,
                    var: 0,
                    coeff: 1.0,
                },
                Term {
                    eq: 0,
                    var: 1,
                    coeff: -1.0,
                },
            ],
            vec![0.0],
            vec![-2.0, 0.0],
            vec![4.0, 1.0],
        )
        .unwrap();
        assert_eq!(knocked_bounds(&s, 0, 0.5, KnockdownRule::Symmetric), (-1.0, 2.0));
        assert_eq!(knocked_bounds(&s, 0, 0.5, KnockdownRule::UpperOnly), (-2.0, 2.0));
        assert_eq!(knocked_bounds(&s, 1, 0.5, KnockdownRule::Symmetric), (0.0, 0.5));
    }

    #[test]
    fn identity_and_inactive_bounds() {
        // x0 + x1 - x2 = 0 with x2 in [0, 10]: x2's bound never binds.
        let s = LinearSystem::new(
            3,
            vec![
                Term {
                    eq: 0,
                    var: 0,
                    coeff: 1.0,
                },
                Term {
                    eq: 0,
                    var: 1,
                    coeff: 1.0,
                },
                Term {
                    eq: 0,
                    var: 2,
                    coeff: -1.0,
                },
            ],
            vec![0.0],
            vec![0.0; 3],
            vec![1.0, 1.0, 10.0],
        )
        .unwrap();
        let one = knockdown_scan(
            &s,
            &KnockdownConfig {
                factor: 1.0,
                ..KnockdownConfig::default()
            },
        )
        .unwrap();
        assert!(one.entries.iter().all(|e| e.delta_h == Some(0.0)));
        let half = knockdown_scan(&s, &KnockdownConfig::default()).unwrap();
        assert!(half.entries[2].delta_h.unwrap().abs() < 1e-9);
        // Halving x0 halves the volume exactly: the polytope is a box in (x0, x1).
        assert!((half.entries[0].delta_h.unwrap() - 2f64.ln()).abs() < 1e-9);
        assert_eq!(half.ranking[2], 2);
    }
}
