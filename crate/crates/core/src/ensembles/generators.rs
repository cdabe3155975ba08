use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinearSystem, Term};
use crate::rng::{stream_rng, Stream};

/// Random ensemble families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    Er,
    SmallWorld,
    ScaleFree,
}

/// Parameters of a random instance. Coefficients are `±1`, `y = 0`, and every
/// variable lies in `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n_vars: usize,
    pub n_eqs: usize,
    /// Mean number of variables per equation (ER).
    pub mean_degree: f64,
    /// Random links added to the ring (small world).
    pub extra_links: usize,
    /// Degree of each added variable (scale free).
    pub added_var_degree: usize,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn er(n_vars: usize, n_eqs: usize, mean_degree: f64, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::Er,
            n_vars,
            n_eqs,
            mean_degree,
            extra_links: 0,
            added_var_degree: 3,
            lower: 0.0,
            upper: 1.0,
            seed,
        }
    }

    pub fn small_world(n_vars: usize, n_eqs: usize, extra_links: usize, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::SmallWorld,
            extra_links,
            ..Self::er(n_vars, n_eqs, 2.0, seed)
        }
    }

    pub fn scale_free(n_vars: usize, n_eqs: usize, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::ScaleFree,
            ..Self::er(n_vars, n_eqs, 2.0, seed)
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Generates an instance of `spec`'s family.
pub fn generate(spec: &EnsembleSpec) -> Result<LinearSystem> {
    match spec.kind {
        EnsembleKind::Er => gen_er(spec),
        EnsembleKind::SmallWorld => gen_small_world(spec),
        EnsembleKind::ScaleFree => gen_scale_free(spec),
    }
}

fn sign<R: Rng>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn build(spec: &EnsembleSpec, terms: Vec<Term>) -> Result<LinearSystem> {
    if !(spec.lower < spec.upper) {
        return Err(Error::Parameter(format!("empty box [{}, {}]", spec.lower, spec.upper)));
    }
    LinearSystem::new(
        spec.n_vars,
        terms,
        vec![0.0; spec.n_eqs],
        vec![spec.lower; spec.n_vars],
        vec![spec.upper; spec.n_vars],
    )
}

/// Each equation draws `floor(k)` or `floor(k) + 1` distinct variables (so the
/// mean is `k`), with `±1` signs redrawn until both signs occur.
pub fn gen_er(spec: &EnsembleSpec) -> Result<LinearSystem> {
    let k = spec.mean_degree;
    if !(k >= 2.0) || k > spec.n_vars as f64 || spec.n_eqs == 0 {
        return Err(Error::Parameter(format!(
            "mean degree {k} needs 2 <= k <= n_vars = {} and at least one equation",
            spec.n_vars
        )));
    }
    let mut rng = stream_rng(spec.seed, Stream::Generator);
    let base = k.floor() as usize;
    let frac = k - k.floor();
    let mut terms = Vec::new();
    for eq in 0..spec.n_eqs {
        let degree = (base + usize::from(rng.random::<f64>() < frac)).min(spec.n_vars);
        let vars = sample_indices(&mut rng, spec.n_vars, degree).into_vec();
        let signs = balanced_signs(&mut rng, degree);
        terms.extend(vars.into_iter().zip(signs).map(|(var, coeff)| Term { eq, var, coeff }));
    }
    build(spec, terms)
}

fn balanced_signs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let s: Vec<f64> = (0..n).map(|_| sign(rng)).collect();
        if s.iter().any(|&v| v > 0.0) && s.iter().any(|&v| v < 0.0) {
            return s;
        }
    }
}

/// Ring `x_0 - x_1, x_1 - x_2, ..., x_{M-1} - x_0` over the first `M` variables,
/// plus `extra_links` distinct random equation-variable links with random signs.
pub fn gen_small_world(spec: &EnsembleSpec) -> Result<LinearSystem> {
    let (n, m) = (spec.n_vars, spec.n_eqs);
    if m < 2 || n < m || spec.extra_links > m * n - 2 * m {
        return Err(Error::Parameter(format!(
            "small world needs 2 <= n_eqs <= n_vars and at most {} extra links",
            (m * n).saturating_sub(2 * m)
        )));
    }
    let mut rng = stream_rng(spec.seed, Stream::Generator);
    let mut linked = vec![vec![false; n]; m];
    let mut terms = Vec::new();
    for a in 0..m {
        let (i, j) = (a, (a + 1) % m);
        terms.push(Term {
            eq: a,
            var: i,
            coeff: 1.0,
        });
        terms.push(Term {
            eq: a,
            var: j,
            coeff: -1.0,
        });
        linked[a][i] = true;
        linked[a][j] = true;
    }
    let mut added = 0;
    while added < spec.extra_links {
        let a = rng.random_range(0..m);
        let i = rng.random_range(0..n);
        if !linked[a][i] {
            linked[a][i] = true;
            terms.push(Term {
                eq: a,
                var: i,
                coeff: sign(&mut rng),
            });
            added += 1;
        }
    }
    build(spec, terms)
}

/// Seed graph: equation `a` links `x_{2a}` (+1) and `x_{2a+1}` (-1). Every
/// further variable links `added_var_degree` distinct equations chosen with
/// probability proportional to their current degree, with random signs.
pub fn gen_scale_free(spec: &EnsembleSpec) -> Result<LinearSystem> {
    let (n, m, d) = (spec.n_vars, spec.n_eqs, spec.added_var_degree);
    if m == 0 || n < 2 * m || d == 0 || d > m {
        return Err(Error::Parameter(format!(
            "scale free needs n_vars >= 2 n_eqs and 1 <= added degree <= n_eqs (got {n}, {m}, {d})"
        )));
    }
    let mut rng = stream_rng(spec.seed, Stream::Generator);
    let mut degree = vec![2usize; m];
    let mut terms = Vec::new();
    for a in 0..m {
        terms.push(Term {
            eq: a,
            var: 2 * a,
            coeff: 1.0,
        });
        terms.push(Term {
            eq: a,
            var: 2 * a + 1,
            coeff: -1.0,
        });
    }
    for var in 2 * m..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(d);
        while chosen.len() < d {
            let total: usize = (0..m).filter(|a| !chosen.contains(a)).map(|a| degree[a]).sum();
            let mut r = rng.random_range(0..total);
            let pick = (0..m)
                .filter(|a| !chosen.contains(a))
                .find(|&a| {
                    if r < degree[a] {
                        true
                    } else {
                        r -= degree[a];
                        false
                    }
                })
                .expect("weights cover the draw");
            chosen.push(pick);
        }
        for a in chosen {
            degree[a] += 1;
            terms.push(Term {
                eq: a,
                var,
                coeff: sign(&mut rng),
            });
        }
    }
    build(spec, terms)
}

/// Gini coefficient of a list of non-negative values.
pub fn gini(values: &[usize]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let weighted: f64 = v.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x).sum();
    2.0 * weighted / (n * total) - (n + 1.0) / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FactorGraph;

    #[test]
    fn er_shape_and_sign_balance() {
        let s = gen_er(&EnsembleSpec::er(12, 4, 3.0, 1)).unwrap();
        assert_eq!((s.n_vars(), s.n_eqs()), (12, 4));
        let g = FactorGraph::build(&s);
        for a in 0..4 {
            assert_eq!(g.factor_degree(a), 3);
            let coeffs: Vec<f64> = g.factor_edges(a).map(|e| g.edge(e).coeff).collect();
            assert!(coeffs.contains(&1.0) && coeffs.contains(&-1.0));
        }
        assert!(s.is_feasible(&[0.0; 12], 0.0, 0.0));
    }

    #[test]
    fn er_mean_degree_is_respected() {
        let s = gen_er(&EnsembleSpec::er(100, 25, 5.0, 4)).unwrap();
        assert_eq!(s.entries().len(), 125);
        let s = gen_er(&EnsembleSpec::er(1000, 400, 3.5, 4)).unwrap();
        let mean = s.entries().len() as f64 / 400.0;
        assert!((mean - 3.5).abs() < 0.1, "{mean}");
    }

    #[test]
    fn generators_are_deterministic() {
        for spec in [
            EnsembleSpec::er(30, 10, 3.3, 7),
            EnsembleSpec::small_world(30, 10, 6, 7),
            EnsembleSpec::scale_free(30, 10, 7),
        ] {
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
            assert_ne!(generate(&spec).unwrap(), generate(&spec.with_seed(8)).unwrap());
        }
    }

    #[test]
    fn small_world_ring_and_links() {
        let s = gen_small_world(&EnsembleSpec::small_world(6, 6, 0, 1)).unwrap();
        let g = FactorGraph::build(&s);
        assert!((0..6).all(|i| g.var_degree(i) == 2));
        assert!((0..6).all(|a| g.factor_degree(a) == 2));
        let s = gen_small_world(&EnsembleSpec::small_world(10, 6, 5, 1)).unwrap();
        assert_eq!(s.entries().len(), 12 + 5);
    }

    #[test]
    fn scale_free_seed_graph_and_tail() {
        let s = gen_scale_free(&EnsembleSpec::scale_free(8, 4, 1)).unwrap();
        let g = FactorGraph::build(&s);
        assert!((0..4).all(|a| g.factor_degree(a) == 2));

        let sf = gen_scale_free(&EnsembleSpec::scale_free(5000, 1000, 3)).unwrap();
        let edges = sf.entries().len();
        let er = gen_er(&EnsembleSpec::er(5000, 1000, edges as f64 / 1000.0, 3)).unwrap();
        let deg = |s: &LinearSystem| {
            let g = FactorGraph::build(s);
            (0..g.n_factors()).map(|a| g.factor_degree(a)).collect::<Vec<_>>()
        };
        assert!(gini(&deg(&sf)) > gini(&deg(&er)) + 0.05);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(gen_er(&EnsembleSpec::er(5, 2, 1.5, 0)).is_err());
        assert!(gen_er(&EnsembleSpec::er(5, 2, 6.0, 0)).is_err());
        assert!(gen_scale_free(&EnsembleSpec::scale_free(5, 3, 0)).is_err());
        assert!(gen_small_world(&EnsembleSpec::small_world(3, 4, 0, 0)).is_err());
    }
}
