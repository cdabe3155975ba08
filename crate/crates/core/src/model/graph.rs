use super::LinearSystem;

/// One edge of the factor graph: variable `var` appears in equation `factor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub factor: usize,
    pub var: usize,
    pub coeff: f64,
}

/// Bipartite equation/variable adjacency in compressed form.
///
/// Edges are numbered in `(factor, var)` order, so the edges of factor `a`
/// form the contiguous range [`FactorGraph::factor_edges`]. Each variable keeps
/// the list of its edge ids in increasing factor order.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    edges: Vec<Edge>,
    factor_start: Vec<usize>,
    var_start: Vec<usize>,
    var_edge_ids: Vec<usize>,
}

impl FactorGraph {
    pub fn build(sys: &LinearSystem) -> Self {
        let edges: Vec<Edge> = sys
            .entries()
            .iter()
            .map(|t| Edge {
                factor: t.eq,
                var: t.var,
                coeff: t.coeff,
            })
            .collect();
        let mut factor_start = vec![0; sys.n_eqs() + 1];
        for e in &edges {
            factor_start[e.factor + 1] += 1;
        }
        for a in 0..sys.n_eqs() {
            factor_start[a + 1] += factor_start[a];
        }
        let mut var_start = vec![0; sys.n_vars() + 1];
        for e in &edges {
            var_start[e.var + 1] += 1;
        }
        for i in 0..sys.n_vars() {
            var_start[i + 1] += var_start[i];
        }
        let mut fill = var_start.clone();
        let mut var_edge_ids = vec![0; edges.len()];
        for (id, e) in edges.iter().enumerate() {
            var_edge_ids[fill[e.var]] = id;
            fill[e.var] += 1;
        }
        Self {
            edges,
            factor_start,
            var_start,
            var_edge_ids,
        }
    }

    pub fn n_factors(&self) -> usize {
        self.factor_start.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.var_start.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Edge {
        self.edges[id]
    }

    /// Edge ids of factor `a`.
    pub fn factor_edges(&self, a: usize) -> std::ops::Range<usize> {
        self.factor_start[a]..self.factor_start[a + 1]
    }

    /// Edge ids of variable `i`.
    pub fn var_edges(&self, i: usize) -> &[usize] {
        &self.var_edge_ids[self.var_start[i]..self.var_start[i + 1]]
    }

    pub fn factor_degree(&self, a: usize) -> usize {
        self.factor_start[a + 1] - self.factor_start[a]
    }

    pub fn var_degree(&self, i: usize) -> usize {
        self.var_start[i + 1] - self.var_start[i]
    }

    /// Variables in no equation; they contribute their box width to the volume.
    pub fn is_free(&self, i: usize) -> bool {
        self.var_degree(i) == 0
    }

    /// Edge id joining `a` and `i`, if any.
    pub fn edge_between(&self, a: usize, i: usize) -> Option<usize> {
        self.factor_edges(a).find(|&e| self.edges[e].var == i)
    }

    /// Connected components as (variables, factors); free variables are singleton
    /// components with no factors.
    pub fn components(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let n = self.n_vars();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut vars = vec![start];
            let mut factors = Vec::new();
            let mut seen_factor = std::collections::HashSet::new();
            comp[start] = id;
            let mut k = 0;
            while k < vars.len() {
                let i = vars[k];
                k += 1;
                for &e in self.var_edges(i) {
                    let a = self.edges[e].factor;
                    if seen_factor.insert(a) {
                        factors.push(a);
                        for f in self.factor_edges(a) {
                            let j = self.edges[f].var;
                            if comp[j] == usize::MAX {
                                comp[j] = id;
                                vars.push(j);
                            }
                        }
                    }
                }
            }
            vars.sort_unstable();
            factors.sort_unstable();
            out.push((vars, factors));
        }
        out
    }
}
