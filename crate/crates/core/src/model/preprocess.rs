//! Bound tightening, metabolic-network transformations, and elimination of
//! variables whose value is fixed.

use std::collections::HashMap;

use microlp::{ComparisonOp, Error as LpError, OptimizationDirection, Problem, SolveOutcome};

use super::{FactorGraph, LinearSystem, Term};
use crate::error::{Error, Result};
use crate::linalg::rref;

/// Absolute tolerance on interval emptiness and equation residuals.
pub const DEFAULT_FEAS_TOL: f64 = 1e-9;

/// Intervals narrower than this are pinned to their midpoint.
pub const PIN_WIDTH: f64 = 1e-12;

/// Range of `sum_j coeff_j x_j` for `x_j` in `[lo_j, hi_j]`.
fn term_range(coeff: f64, lo: f64, hi: f64) -> (f64, f64) {
    if coeff > 0.0 {
        (coeff * lo, coeff * hi)
    } else {
        (coeff * hi, coeff * lo)
    }
}

/// Tightens variable bounds to a fixed point of per-equation interval propagation.
///
/// Each round visits every equation `a` and intersects `[a_i, b_i]` with the
/// range of `(y_a - sum_{j != i} S_aj x_j) / S_ai`. Stops when no bound moves by
/// more than `tol` or after `max_rounds` rounds. Bounds never widen.
pub fn reduce_intervals(sys: &LinearSystem, max_rounds: usize, tol: f64) -> Result<LinearSystem> {
    let graph = FactorGraph::build(sys);
    let mut lower = sys.lower().to_vec();
    let mut upper = sys.upper().to_vec();
    for _ in 0..max_rounds {
        let mut change: f64 = 0.0;
        for a in 0..graph.n_factors() {
            let y = sys.rhs()[a];
            for e in graph.factor_edges(a) {
                let target = graph.edge(e);
                // Sum of the other terms, recomputed so later edges see tightened bounds.
                let (mut lo, mut hi) = (0.0, 0.0);
                for f in graph.factor_edges(a) {
                    if f == e {
                        continue;
                    }
                    let other = graph.edge(f);
                    let (l, h) = term_range(other.coeff, lower[other.var], upper[other.var]);
                    lo += l;
                    hi += h;
                }
                let (new_lo, new_hi) = term_range(1.0 / target.coeff, y - hi, y - lo);
                let i = target.var;
                let lo_i = lower[i].max(new_lo);
                let hi_i = upper[i].min(new_hi);
                if lo_i > hi_i + tol {
                    return Err(Error::Infeasible(format!(
                        "empty interval for {} in equation {}: [{lo_i}, {hi_i}]",
                        sys.var_name(i),
                        sys.eq_name(a)
                    )));
                }
                let (lo_i, hi_i) = if lo_i > hi_i {
                    let mid = 0.5 * (lo_i + hi_i);
                    (mid, mid)
                } else {
                    (lo_i, hi_i)
                };
                change = change.max(lo_i - lower[i]).max(upper[i] - hi_i);
                lower[i] = lo_i;
                upper[i] = hi_i;
            }
        }
        if change < tol {
            break;
        }
    }
    sys.with_bounds(lower, upper)
}

/// Tightens every box to the exact range of its variable over the polytope.
///
/// Solves `min x_i` and `max x_i` subject to `S x = y` and the boxes. A bound
/// already attained by an earlier optimal vertex needs no program of its own.
/// New bounds are widened by `tol * (1 + |bound|)` and never leave the old box;
/// a range no wider than that collapses to its midpoint.
pub fn exact_bounds(sys: &LinearSystem, tol: f64) -> Result<LinearSystem> {
    let n = sys.n_vars();
    let (old_lo, old_hi) = (sys.lower(), sys.upper());
    let mut lower = old_lo.to_vec();
    let mut upper = old_hi.to_vec();
    let mut lo_done = vec![false; n];
    let mut hi_done = vec![false; n];
    let mut lo_raw = old_lo.to_vec();
    let mut hi_raw = old_hi.to_vec();
    let rows: Vec<Vec<(usize, f64)>> = {
        let mut r = vec![Vec::new(); sys.n_eqs()];
        for t in sys.entries() {
            r[t.eq].push((t.var, t.coeff));
        }
        r
    };
    for i in 0..n {
        for maximize in [false, true] {
            if (maximize && hi_done[i]) || (!maximize && lo_done[i]) {
                continue;
            }
            let direction = if maximize {
                OptimizationDirection::Maximize
            } else {
                OptimizationDirection::Minimize
            };
            let mut lp = Problem::new(direction);
            let vars: Vec<_> = (0..n)
                .map(|j| lp.add_var(if j == i { 1.0 } else { 0.0 }, (old_lo[j], old_hi[j])))
                .collect();
            for (a, row) in rows.iter().enumerate() {
                let expr: Vec<_> = row.iter().map(|&(j, c)| (vars[j], c)).collect();
                lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, sys.rhs()[a]);
            }
            let solution = match lp.solve() {
                Ok(SolveOutcome::Solution(s)) => s,
                Ok(SolveOutcome::Interrupted(_)) => {
                    return Err(Error::Domain(format!(
                        "range program for {} was interrupted",
                        sys.var_name(i)
                    )))
                }
                Err(LpError::Infeasible) => {
                    return Err(Error::Infeasible(
                        "no point satisfies the equations within the boxes".into(),
                    ))
                }
                Err(e) => return Err(Error::Domain(format!("range program for {}: {e}", sys.var_name(i)))),
            };
            for j in 0..n {
                let v = solution.var_value_raw(vars[j]);
                let slack = tol * (1.0 + v.abs());
                lo_done[j] |= v <= old_lo[j] + slack;
                hi_done[j] |= v >= old_hi[j] - slack;
            }
            let v = solution.objective();
            let slack = tol * (1.0 + v.abs());
            if maximize {
                hi_raw[i] = v;
                upper[i] = (v + slack).min(old_hi[i]);
            } else {
                lo_raw[i] = v;
                lower[i] = (v - slack).max(old_lo[i]);
            }
        }
        if hi_raw[i] - lo_raw[i] <= tol * (1.0 + lo_raw[i].abs() + hi_raw[i].abs()) {
            let mid = (0.5 * (lo_raw[i] + hi_raw[i])).clamp(old_lo[i], old_hi[i]);
            lower[i] = mid;
            upper[i] = mid;
        }
    }
    sys.with_bounds(lower, upper)
}

/// Appends one drain variable per equation with coefficient `-1` and bounds `[0, drain_bound]`.
pub fn add_drains(sys: &LinearSystem, drain_bound: f64) -> Result<LinearSystem> {
    if !(drain_bound > 0.0) {
        return Err(Error::Parameter(format!(
            "drain bound must be positive, got {drain_bound}"
        )));
    }
    let n = sys.n_vars();
    let m = sys.n_eqs();
    let mut entries = sys.entries().to_vec();
    entries.extend((0..m).map(|a| Term {
        eq: a,
        var: n + a,
        coeff: -1.0,
    }));
    let mut lower = sys.lower().to_vec();
    let mut upper = sys.upper().to_vec();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(std::iter::repeat_n(drain_bound, m));
    let mut out = LinearSystem::new(n + m, entries, sys.rhs().to_vec(), lower, upper)?;
    let mut names: Vec<String> = (0..n).map(|i| sys.var_name(i)).collect();
    names.extend((0..m).map(|a| format!("drain_{}", sys.eq_name(a))));
    out = out.with_var_names(names)?;
    if let Some(eq_names) = sys.eq_names() {
        out = out.with_eq_names(eq_names.to_vec())?;
    }
    Ok(out)
}

/// Merges pairs of irreversible columns that are exact negations of each other.
///
/// Columns `i < j` with `S[:, j] == -S[:, i]` and bounds `[0, u_i]`, `[0, u_j]`
/// become one column (the coefficients of `i`) with bounds `[-u_j, u_i]`. Pairing
/// is greedy in index order and each column is merged at most once per call.
pub fn merge_mirrors(sys: &LinearSystem) -> Result<LinearSystem> {
    let n = sys.n_vars();
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for t in sys.entries() {
        columns[t.var].push((t.eq, t.coeff));
    }
    let irreversible = |i: usize| sys.lower()[i] == 0.0;
    let mirrored = |i: usize, j: usize| {
        columns[i].len() == columns[j].len()
            && columns[i]
                .iter()
                .zip(&columns[j])
                .all(|(&(ea, ca), &(eb, cb))| ea == eb && ca == -cb)
    };
    let mut partner = vec![None; n];
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || !irreversible(i) || columns[i].is_empty() {
            continue;
        }
        if let Some(j) = (i + 1..n).find(|&j| !used[j] && irreversible(j) && mirrored(i, j)) {
            used[i] = true;
            used[j] = true;
            partner[i] = Some(j);
        }
    }
    let mut lower = sys.lower().to_vec();
    let mut keep = vec![true; n];
    for i in 0..n {
        if let Some(j) = partner[i] {
            lower[i] = -sys.upper()[j];
            keep[j] = false;
        }
    }
    sys.with_bounds(lower, sys.upper().to_vec())?.retain_vars(&keep)
}

/// Result of removing fixed variables from a system.
#[derive(Debug, Clone)]
pub struct Elimination {
    /// The remaining system over the free variables and active equations.
    pub system: LinearSystem,
    /// Reduced variable index -> original variable index.
    pub var_map: Vec<usize>,
    /// Reduced equation index -> original equation index.
    pub eq_map: Vec<usize>,
    /// Value of each original variable that was eliminated.
    pub pinned: Vec<Option<f64>>,
    /// `-sum ln|S_ai|` over equations that fixed a single variable. These
    /// equations contribute `1/|S_ai|` to the volume `int delta(Sx - y) dx`.
    pub log_jacobian: f64,
    /// Original equations dropped as multiples of an earlier remaining equation.
    pub parallel: Vec<usize>,
}

impl Elimination {
    pub fn n_pinned(&self) -> usize {
        self.pinned.iter().filter(|p| p.is_some()).count()
    }
}

/// Repeatedly pins variables fixed by a degree-1 equation or by a box narrower
/// than `width_tol`, substituting their values into the remaining equations.
///
/// Equations left without unknowns are dropped after checking their residual.
pub fn eliminate_fixed(sys: &LinearSystem, width_tol: f64, feas_tol: f64) -> Result<Elimination> {
    let graph = FactorGraph::build(sys);
    let n = sys.n_vars();
    let m = sys.n_eqs();
    let mut pinned: Vec<Option<f64>> = vec![None; n];
    let mut active = vec![true; m];
    let mut log_jacobian = 0.0;
    loop {
        let mut changed = false;
        for a in 0..m {
            if !active[a] {
                continue;
            }
            let mut residual = sys.rhs()[a];
            let mut scale = residual.abs();
            let mut unknown = None;
            let mut n_unknown = 0;
            for e in graph.factor_edges(a) {
                let edge = graph.edge(e);
                match pinned[edge.var] {
                    Some(v) => {
                        residual -= edge.coeff * v;
                        scale += (edge.coeff * v).abs();
                    }
                    None => {
                        n_unknown += 1;
                        unknown = Some(edge);
                    }
                }
            }
            let tol = feas_tol * (1.0 + scale);
            match (n_unknown, unknown) {
                (0, _) => {
                    if residual.abs() > tol {
                        return Err(Error::Infeasible(format!(
                            "equation {} has residual {residual} after substitution",
                            sys.eq_name(a)
                        )));
                    }
                    active[a] = false;
                    changed = true;
                }
                (1, Some(edge)) => {
                    let i = edge.var;
                    let value = residual / edge.coeff;
                    let (lo, hi) = (sys.lower()[i], sys.upper()[i]);
                    if value < lo - tol || value > hi + tol {
                        return Err(Error::Infeasible(format!(
                            "equation {} forces {} = {value}, outside [{lo}, {hi}]",
                            sys.eq_name(a),
                            sys.var_name(i)
                        )));
                    }
                    pinned[i] = Some(value.clamp(lo, hi));
                    log_jacobian -= edge.coeff.abs().ln();
                    active[a] = false;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            changed = pin_determined(sys, &graph, &mut pinned, &mut active, &mut log_jacobian, feas_tol)?;
        }
        // Narrow boxes are pinned only once no equation fixes a variable, so a
        // variable forced by an equation keeps its Jacobian factor.
        if !changed {
            for i in 0..n {
                if pinned[i].is_none() && sys.width(i) < width_tol {
                    pinned[i] = Some(0.5 * (sys.lower()[i] + sys.upper()[i]));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let parallel = drop_parallel(sys, &graph, &pinned, &mut active, feas_tol)?;

    let var_map: Vec<usize> = (0..n).filter(|&i| pinned[i].is_none()).collect();
    let eq_map: Vec<usize> = (0..m).filter(|&a| active[a]).collect();
    let mut new_var = vec![usize::MAX; n];
    for (k, &i) in var_map.iter().enumerate() {
        new_var[i] = k;
    }
    let mut rhs = Vec::with_capacity(eq_map.len());
    let mut entries = Vec::new();
    for (k, &a) in eq_map.iter().enumerate() {
        let mut y = sys.rhs()[a];
        for e in graph.factor_edges(a) {
            let edge = graph.edge(e);
            match pinned[edge.var] {
                Some(v) => y -= edge.coeff * v,
                None => entries.push(Term {
                    eq: k,
                    var: new_var[edge.var],
                    coeff: edge.coeff,
                }),
            }
        }
        rhs.push(y);
    }
    let mut system = LinearSystem::new(
        var_map.len(),
        entries,
        rhs,
        var_map.iter().map(|&i| sys.lower()[i]).collect(),
        var_map.iter().map(|&i| sys.upper()[i]).collect(),
    )?;
    system = system.with_var_names(var_map.iter().map(|&i| sys.var_name(i)).collect())?;
    system = system.with_eq_names(eq_map.iter().map(|&a| sys.eq_name(a)).collect())?;
    Ok(Elimination {
        system,
        var_map,
        eq_map,
        pinned,
        log_jacobian,
        parallel,
    })
}

/// Largest dense matrix (rows times columns) searched for determined variables.
pub const DENSE_PIN_LIMIT: usize = 4_000_000;

/// Pins one variable that the active equations determine jointly, if any.
///
/// With `w^T S = e_j`, replacing row `p` by `w^T S` scales the volume by
/// `|w_p|` and leaves the row `x_j = w^T y`, which is then substituted.
fn pin_determined(
    sys: &LinearSystem,
    graph: &FactorGraph,
    pinned: &mut [Option<f64>],
    active: &mut [bool],
    log_jacobian: &mut f64,
    feas_tol: f64,
) -> Result<bool> {
    let rows: Vec<usize> = (0..sys.n_eqs()).filter(|&a| active[a]).collect();
    let mut col_of = vec![usize::MAX; sys.n_vars()];
    let mut cols = Vec::new();
    for &a in &rows {
        for e in graph.factor_edges(a) {
            let i = graph.edge(e).var;
            if pinned[i].is_none() && col_of[i] == usize::MAX {
                col_of[i] = cols.len();
                cols.push(i);
            }
        }
    }
    if rows.len() < 2 || rows.len() * cols.len() > DENSE_PIN_LIMIT {
        return Ok(false);
    }
    let mut a_mat = vec![vec![0.0; cols.len()]; rows.len()];
    let mut y = vec![0.0; rows.len()];
    let mut scale = 0.0f64;
    for (r, &a) in rows.iter().enumerate() {
        y[r] = sys.rhs()[a];
        for e in graph.factor_edges(a) {
            let edge = graph.edge(e);
            match pinned[edge.var] {
                Some(v) => y[r] -= edge.coeff * v,
                None => a_mat[r][col_of[edge.var]] = edge.coeff,
            }
        }
        scale = scale.max(y[r].abs());
    }
    let red = rref(&a_mat, &y, 1e-12);
    if red.inconsistency > feas_tol * (1.0 + scale) {
        return Err(Error::Infeasible(format!(
            "equations are inconsistent (residual {:.3e})",
            red.inconsistency
        )));
    }
    let free = red.free_columns();
    let Some(k) = (0..red.rank()).find(|&k| free.iter().all(|&f| red.rows[k][f].abs() <= 1e-9)) else {
        return Ok(false);
    };
    let c = red.pivots[k];
    let transposed: Vec<Vec<f64>> = (0..cols.len())
        .map(|j| a_mat.iter().map(|row| row[j]).collect())
        .collect();
    let mut unit = vec![0.0; cols.len()];
    unit[c] = 1.0;
    let w = rref(&transposed, &unit, 1e-12).particular();
    let p = (0..rows.len())
        .max_by(|&u, &v| w[u].abs().total_cmp(&w[v].abs()))
        .expect("rows");
    let value: f64 = w.iter().zip(&y).map(|(wi, yi)| wi * yi).sum();
    let i = cols[c];
    let (lo, hi) = (sys.lower()[i], sys.upper()[i]);
    let tol = feas_tol * (1.0 + scale);
    if value < lo - tol || value > hi + tol {
        return Err(Error::Infeasible(format!(
            "the equations force {} = {value}, outside [{lo}, {hi}]",
            sys.var_name(i)
        )));
    }
    pinned[i] = Some(value.clamp(lo, hi));
    active[rows[p]] = false;
    *log_jacobian += w[p].abs().ln();
    Ok(true)
}

/// Deactivates every remaining equation whose reduced row is a multiple of an
/// earlier one, after checking that the right-hand sides agree.
fn drop_parallel(
    sys: &LinearSystem,
    graph: &FactorGraph,
    pinned: &[Option<f64>],
    active: &mut [bool],
    feas_tol: f64,
) -> Result<Vec<usize>> {
    let mut groups: HashMap<Vec<usize>, Vec<(usize, Vec<f64>, f64)>> = HashMap::new();
    let mut dropped = Vec::new();
    for a in 0..sys.n_eqs() {
        if !active[a] {
            continue;
        }
        let mut y = sys.rhs()[a];
        let mut row: Vec<(usize, f64)> = Vec::new();
        for e in graph.factor_edges(a) {
            let edge = graph.edge(e);
            match pinned[edge.var] {
                Some(v) => y -= edge.coeff * v,
                None => row.push((edge.var, edge.coeff)),
            }
        }
        row.sort_by_key(|t| t.0);
        let vars: Vec<usize> = row.iter().map(|t| t.0).collect();
        let coeffs: Vec<f64> = row.iter().map(|t| t.1).collect();
        let group = groups.entry(vars).or_default();
        let mut duplicate = false;
        for (b, other, y_other) in group.iter() {
            let r = coeffs[0] / other[0];
            let same = coeffs
                .iter()
                .zip(other)
                .all(|(c, o)| (c - r * o).abs() <= 1e-12 * c.abs().max((r * o).abs()));
            if same {
                if (y - r * y_other).abs() > feas_tol * (1.0 + y.abs().max((r * y_other).abs())) {
                    return Err(Error::Infeasible(format!(
                        "equation {} is a multiple of {} with a different right-hand side",
                        sys.eq_name(a),
                        sys.eq_name(*b)
                    )));
                }
                duplicate = true;
                break;
            }
        }
        if duplicate {
            active[a] = false;
            dropped.push(a);
        } else {
            group.push((a, coeffs, y));
        }
    }
    Ok(dropped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(n: usize, terms: &[(usize, usize, f64)], y: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> LinearSystem {
        let _ = n;
        LinearSystem::new(
            lower.len(),
            terms.iter().map(|&(eq, var, coeff)| Term { eq, var, coeff }).collect(),
            y,
            lower,
            upper,
        )
        .unwrap()
    }

    #[test]
    fn reduce_equality_intersects() {
        let s = sys(
            2,
            &[(0, 0, 1.0), (0, 1, -1.0)],
            vec![0.0],
            vec![0.0, 0.5],
            vec![1.0, 2.0],
        );
        let r = reduce_intervals(&s, 50, 1e-9).unwrap();
        assert_eq!(r.lower(), &[0.5, 0.5]);
        assert_eq!(r.upper(), &[1.0, 1.0]);
    }

    #[test]
    fn reduce_detects_infeasible() {
        let s = sys(2, &[(0, 0, 1.0), (0, 1, 1.0)], vec![3.0], vec![0.0; 2], vec![1.0; 2]);
        assert!(matches!(reduce_intervals(&s, 50, 1e-9), Err(Error::Infeasible(_))));
    }

    #[test]
    fn reduce_with_scaled_coefficients() {
        // 2 x0 + x1 = 3 with x0, x1 in [0, 1]: x0 in [1, 1.5] ∩ [0, 1] = {1}, x1 = 1.
        let s = sys(2, &[(0, 0, 2.0), (0, 1, 1.0)], vec![3.0], vec![0.0; 2], vec![1.0; 2]);
        let r = reduce_intervals(&s, 50, 1e-12).unwrap();
        assert!((r.lower()[0] - 1.0).abs() < 1e-12 && (r.upper()[0] - 1.0).abs() < 1e-12);
        assert!((r.lower()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_bounds_see_through_two_equations() {
        // x0 + x1 = x2 and x0 = x1 give x0 = x1 <= 1/2; propagation alone keeps [0, 1].
        let s = sys(
            3,
            &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, -1.0), (1, 0, 1.0), (1, 1, -1.0)],
            vec![0.0; 2],
            vec![0.0; 3],
            vec![1.0; 3],
        );
        let loose = reduce_intervals(&s, 50, 1e-12).unwrap();
        assert_eq!(loose.upper(), &[1.0, 1.0, 1.0]);
        let r = exact_bounds(&s, 1e-9).unwrap();
        assert!((r.upper()[0] - 0.5).abs() < 1e-8 && (r.upper()[1] - 0.5).abs() < 1e-8);
        assert_eq!((r.lower()[2], r.upper()[2]), (0.0, 1.0));
        assert!(r.lower().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_bounds_detect_infeasible() {
        let s = sys(2, &[(0, 0, 1.0), (0, 1, 1.0)], vec![3.0], vec![0.0; 2], vec![1.0; 2]);
        assert!(matches!(exact_bounds(&s, 1e-9), Err(Error::Infeasible(_))));
    }

    #[test]
    fn drains_append_one_column_per_equation() {
        let s = sys(
            3,
            &[(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0), (1, 2, -1.0)],
            vec![0.0; 2],
            vec![0.0; 3],
            vec![1.0; 3],
        );
        let d = add_drains(&s, 10.0).unwrap();
        assert_eq!(d.n_vars(), 5);
        let drain_terms: Vec<_> = d.entries().iter().filter(|t| t.var >= 3).collect();
        assert_eq!(drain_terms.len(), 2);
        assert!(drain_terms.iter().all(|t| t.coeff == -1.0));
        assert_eq!(d.upper()[4], 10.0);
        let mut keep = vec![true; 5];
        keep[3] = false;
        keep[4] = false;
        let back = d.retain_vars(&keep).unwrap();
        assert_eq!(back.entries(), s.entries());
        assert_eq!(back.lower(), s.lower());
        assert_eq!(back.upper(), s.upper());
        assert_eq!(back.rhs(), s.rhs());
    }

    #[test]
    fn merges_single_mirror_pair() {
        let s = sys(
            2,
            &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![1.0; 2],
        );
        let m = merge_mirrors(&s).unwrap();
        assert_eq!(m.n_vars(), 1);
        assert_eq!(m.lower(), &[-1.0]);
        assert_eq!(m.upper(), &[1.0]);
        assert_eq!(m.entries().iter().map(|t| t.coeff).collect::<Vec<_>>(), vec![1.0, -1.0]);
    }

    #[test]
    fn no_mirrors_is_identity() {
        let s = sys(2, &[(0, 0, 1.0), (0, 1, 1.0)], vec![1.0], vec![0.0; 2], vec![1.0; 2]);
        assert_eq!(merge_mirrors(&s).unwrap(), s);
    }

    #[test]
    fn mirror_pairing_is_greedy_by_index() {
        // Columns: c0 = (1,-1), c1 = (-1,1), c2 = (-1,1), c3 = (1,-1).
        // Pairs in index order: (0,1) then (2,3).
        let terms = [
            (0, 0, 1.0),
            (1, 0, -1.0),
            (0, 1, -1.0),
            (1, 1, 1.0),
            (0, 2, -1.0),
            (1, 2, 1.0),
            (0, 3, 1.0),
            (1, 3, -1.0),
        ];
        let s = sys(4, &terms, vec![0.0; 2], vec![0.0; 4], vec![1.0, 2.0, 3.0, 4.0]);
        let m = merge_mirrors(&s).unwrap();
        assert_eq!(m.n_vars(), 2);
        assert_eq!(m.lower(), &[-2.0, -4.0]);
        assert_eq!(m.upper(), &[1.0, 3.0]);
        // Three copies of one column and one mirror: only the lowest pair merges.
        let terms = [(0, 0, 1.0), (0, 1, -1.0), (0, 2, 1.0), (0, 3, 1.0)];
        let s = sys(4, &terms, vec![0.0], vec![0.0; 4], vec![1.0; 4]);
        let m = merge_mirrors(&s).unwrap();
        assert_eq!(m.n_vars(), 3);
        assert_eq!(m.lower(), &[-1.0, 0.0, 0.0]);
    }

    #[test]
    fn eliminates_degree_one_cascade() {
        // 2 x0 = 1 pins x0 = 0.5; then x0 + x1 - x2 = 0 keeps two unknowns.
        let s = sys(
            3,
            &[(0, 0, 2.0), (1, 0, 1.0), (1, 1, 1.0), (1, 2, -1.0)],
            vec![1.0, 0.0],
            vec![0.0; 3],
            vec![1.0; 3],
        );
        let e = eliminate_fixed(&s, PIN_WIDTH, DEFAULT_FEAS_TOL).unwrap();
        assert_eq!(e.pinned[0], Some(0.5));
        assert_eq!(e.var_map, vec![1, 2]);
        assert_eq!(e.system.rhs(), &[-0.5]);
        assert!((e.log_jacobian + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn elimination_detects_out_of_box_value() {
        let s = sys(1, &[(0, 0, 1.0)], vec![2.0], vec![0.0], vec![1.0]);
        assert!(matches!(
            eliminate_fixed(&s, PIN_WIDTH, DEFAULT_FEAS_TOL),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn parallel_equations_are_dropped() {
        // Row 1 is -2 times row 0; row 2 repeats row 0 with another right-hand side.
        let s = sys(
            3,
            &[
                (0, 0, 1.0),
                (0, 1, -1.0),
                (1, 0, -2.0),
                (1, 1, 2.0),
                (2, 1, 1.0),
                (2, 2, 1.0),
            ],
            vec![0.5, -1.0, 1.0],
            vec![0.0; 3],
            vec![1.0; 3],
        );
        let el = eliminate_fixed(&s, PIN_WIDTH, 1e-9).unwrap();
        assert_eq!(el.parallel, vec![1]);
        assert_eq!(el.eq_map, vec![0, 2]);
        let bad = sys(
            2,
            &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -2.0), (1, 1, 2.0)],
            vec![0.5, 1.0],
            vec![0.0; 2],
            vec![1.0; 2],
        );
        assert!(matches!(
            eliminate_fixed(&bad, PIN_WIDTH, 1e-9),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn jointly_determined_variable_keeps_the_volume() {
        // x1 - x7 + x8 = 0 and -x1 - x7 + x8 = 0 force x1 = 0. Integrating the
        // two deltas over (x1, x7) gives 1 / |det [[1, -1], [-1, -1]]| = 1/2.
        let s = sys(
            3,
            &[
                (0, 0, 1.0),
                (0, 1, -1.0),
                (0, 2, 1.0),
                (1, 0, -1.0),
                (1, 1, -1.0),
                (1, 2, 1.0),
            ],
            vec![0.0; 2],
            vec![0.0; 3],
            vec![1.0; 3],
        );
        let el = eliminate_fixed(&s, PIN_WIDTH, 1e-9).unwrap();
        assert_eq!(el.pinned[0], Some(0.0));
        assert_eq!(el.system.n_eqs(), 1);
        assert!((el.log_jacobian - 0.5f64.ln()).abs() < 1e-12);
    }
}
