use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, orthonormalize, rref};
use crate::model::{reduce_intervals, LinearSystem, DEFAULT_FEAS_TOL, PIN_WIDTH};
use crate::rng::{stream_rng, Stream};

/// Coordinates on the affine solution set `{S x = y}` restricted to the box.
#[derive(Debug, Clone)]
pub struct PolytopeChart {
    /// Feasible point, pushed towards the interior.
    pub point: Vec<f64>,
    /// Orthonormal basis of the null space of `S` (zero on fixed coordinates).
    pub basis: Vec<Vec<f64>>,
    /// Bounds after interval tightening.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Rank of `S`; below the number of equations when rows are redundant.
    pub rank: usize,
    /// Interior margin of `point`: smallest slack relative to the box width.
    pub margin: f64,
}

impl PolytopeChart {
    pub fn reduced_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn n_vars(&self) -> usize {
        self.point.len()
    }

    /// `t`-interval keeping `x + t d` inside the box.
    pub fn chord(&self, x: &[f64], d: &[f64]) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..x.len() {
            let di = d[i];
            if di.abs() > 1e-14 {
                let a = (self.lower[i] - x[i]) / di;
                let b = (self.upper[i] - x[i]) / di;
                let (a, b) = if di > 0.0 { (a, b) } else { (b, a) };
                lo = lo.max(a);
                hi = hi.min(b);
            }
        }
        (lo.min(0.0), hi.max(0.0))
    }

    /// Random unit direction in the null space.
    pub fn direction<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for q in &self.basis {
            let g: f64 = rng.sample(StandardNormal);
            for (o, v) in out.iter_mut().zip(q) {
                *o += g * v;
            }
        }
        let n = dot(out, out).sqrt();
        if n > 0.0 {
            out.iter_mut().for_each(|v| *v /= n);
        }
    }

    fn min_slack(&self, x: &[f64]) -> f64 {
        let mut s = f64::INFINITY;
        for i in 0..x.len() {
            let w = self.upper[i] - self.lower[i];
            if w >= PIN_WIDTH {
                s = s.min((x[i] - self.lower[i]).min(self.upper[i] - x[i]) / w);
            }
        }
        s
    }
}

fn project_affine(x: &[f64], particular: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let diff: Vec<f64> = x.iter().zip(particular).map(|(a, b)| a - b).collect();
    let mut out = particular.to_vec();
    for q in basis {
        let c = dot(&diff, q);
        for (o, v) in out.iter_mut().zip(q) {
            *o += c * v;
        }
    }
    out
}

/// Builds a chart: null-space basis by row reduction and orthonormalization,
/// a feasible point by alternating projections between the affine set and the
/// box, then a push away from the boundary by line searches that maximize the
/// smallest relative slack.
pub fn chart(sys: &LinearSystem) -> Result<PolytopeChart> {
    let tight = reduce_intervals(sys, 200, DEFAULT_FEAS_TOL)?;
    let n = tight.n_vars();
    let lower = tight.lower().to_vec();
    let upper = tight.upper().to_vec();
    let fixed: Vec<bool> = (0..n).map(|i| upper[i] - lower[i] < PIN_WIDTH).collect();
    let free_cols: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let mut col_of = vec![usize::MAX; n];
    for (k, &i) in free_cols.iter().enumerate() {
        col_of[i] = k;
    }

    let mut matrix = vec![vec![0.0; free_cols.len()]; tight.n_eqs()];
    let mut rhs = tight.rhs().to_vec();
    for t in tight.entries() {
        if fixed[t.var] {
            rhs[t.eq] -= t.coeff * 0.5 * (lower[t.var] + upper[t.var]);
        } else {
            matrix[t.eq][col_of[t.var]] = t.coeff;
        }
    }
    let r = rref(&matrix, &rhs, 1e-12);
    let scale = 1.0 + rhs.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if r.inconsistency > 1e-9 * scale {
        return Err(Error::Infeasible(format!(
            "equations are inconsistent (residual {})",
            r.inconsistency
        )));
    }
    let embed = |v: Vec<f64>, fill: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..n).map(|i| if fixed[i] { fill(i) } else { v[col_of[i]] }).collect()
    };
    let mid = |i: usize| 0.5 * (lower[i] + upper[i]);
    let particular = embed(r.particular(), &mid);
    let basis: Vec<Vec<f64>> = orthonormalize(r.null_vectors(), 1e-10)
        .into_iter()
        .map(|v| embed(v, &|_| 0.0))
        .collect();

    let mut x: Vec<f64> = (0..n).map(mid).collect();
    let box_violation = |z: &[f64]| (0..n).fold(0.0f64, |s, i| s.max(lower[i] - z[i]).max(z[i] - upper[i]));
    let mut feasible = false;
    for _ in 0..100_000 {
        let z = project_affine(&x, &particular, &basis);
        let viol = box_violation(&z);
        let clipped: Vec<f64> = (0..n).map(|i| z[i].clamp(lower[i], upper[i])).collect();
        let moved = (0..n).fold(0.0f64, |s, i| s.max((clipped[i] - x[i]).abs()));
        x = z;
        if viol <= 1e-12 * scale {
            feasible = true;
            break;
        }
        if moved < 1e-15 * scale {
            break;
        }
        x = clipped;
    }
    if !feasible {
        if box_violation(&x) > 1e-9 * scale {
            return Err(Error::Infeasible(
                "no point satisfies the equations within the bounds".into(),
            ));
        }
    }
    for i in 0..n {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }

    let mut chart = PolytopeChart {
        point: x,
        basis,
        lower,
        upper,
        rank: r.rank(),
        margin: 0.0,
    };
    if chart.min_slack(&chart.point) < MIN_START_MARGIN {
        if let Some(z) = max_slack_point(&tight, &fixed) {
            let z = project_affine(&z, &particular, &chart.basis);
            let z: Vec<f64> = (0..n).map(|i| z[i].clamp(chart.lower[i], chart.upper[i])).collect();
            if chart.min_slack(&z) > chart.min_slack(&chart.point) {
                chart.point = z;
            }
        }
    }
    push_interior(&mut chart);
    chart.margin = chart.min_slack(&chart.point);
    Ok(chart)
}

/// Below this relative margin the projected start is replaced by [`max_slack_point`].
const MIN_START_MARGIN: f64 = 1e-6;

/// Point maximizing the smallest relative slack, by one linear program:
/// `max t` with `S x = y` and `a_i + t w_i <= x_i <= b_i - t w_i` on free coordinates.
fn max_slack_point(sys: &LinearSystem, fixed: &[bool]) -> Option<Vec<f64>> {
    let n = sys.n_vars();
    let (lower, upper) = (sys.lower(), sys.upper());
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n).map(|i| lp.add_var(0.0, (lower[i], upper[i]))).collect();
    let t = lp.add_var(1.0, (0.0, 0.5));
    let mut rows = vec![Vec::new(); sys.n_eqs()];
    for term in sys.entries() {
        rows[term.eq].push((vars[term.var], term.coeff));
    }
    for (row, &y) in rows.iter().zip(sys.rhs()) {
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, y);
    }
    for i in (0..n).filter(|&i| !fixed[i]) {
        let w = upper[i] - lower[i];
        lp.add_constraint([(vars[i], 1.0), (t, -w)], ComparisonOp::Ge, lower[i]);
        lp.add_constraint([(vars[i], 1.0), (t, w)], ComparisonOp::Le, upper[i]);
    }
    match lp.solve() {
        Ok(SolveOutcome::Solution(s)) => Some(vars.iter().map(|&v| s.var_value_raw(v)).collect()),
        _ => None,
    }
}

/// Line searches along basis and random directions maximizing the smallest
/// relative slack (a concave function, so golden section suffices per line).
fn push_interior(chart: &mut PolytopeChart) {
    let k = chart.basis.len();
    if k == 0 {
        return;
    }
    let n = chart.point.len();
    let mut rng = stream_rng(0, Stream::Mcmc);
    let mut d = vec![0.0; n];
    let mut best = chart.min_slack(&chart.point);
    for _round in 0..60 {
        let start = best;
        for j in 0..2 * k {
            if j < k {
                d.copy_from_slice(&chart.basis[j]);
            } else {
                chart.direction(&mut rng, &mut d);
            }
            let (lo, hi) = chart.chord(&chart.point, &d);
            if !(hi > lo) {
                continue;
            }
            let x0 = chart.point.clone();
            let f = |t: f64| {
                let x: Vec<f64> = x0.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                chart.min_slack(&x)
            };
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (lo, hi);
            let mut c = b - g * (b - a);
            let mut e = a + g * (b - a);
            let (mut fc, mut fe) = (f(c), f(e));
            for _ in 0..80 {
                if fc >= fe {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - g * (b - a);
                    fc = f(c);
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + g * (b - a);
                    fe = f(e);
                }
            }
            let t = 0.5 * (a + b);
            let ft = f(t);
            if ft > best {
                best = ft;
                for i in 0..n {
                    chart.point[i] = (x0[i] + t * d[i]).clamp(chart.lower[i], chart.upper[i]);
                }
            }
        }
        if best - start < 1e-9 {
            break;
        }
    }
}
