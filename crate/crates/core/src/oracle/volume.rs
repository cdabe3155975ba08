//! Exact volume `V = int delta(S x - y) dx` over the box, for small systems.
//!
//! Each connected component is handled separately. Row reduction picks basic
//! variables `x_B`, so `V_comp = vol(P) / |det S_B|` where `P` is the region of
//! the free coordinates for which every basic variable stays in its box. The
//! polytope volume uses the facet recursion `vol_k(F) = (1/k) sum_i h_i
//! vol_{k-1}(F_i)` (`h_i` the distance from a reference point in `aff F` to the
//! facet hyperplane), memoized by the set of tight constraints.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, orthonormalize, rref};
use crate::model::{FactorGraph, LinearSystem, DEFAULT_FEAS_TOL, PIN_WIDTH};
use crate::rng::{stream_rng, Stream};

/// Largest free dimension per component accepted by default.
pub const DEFAULT_MAX_DIM: usize = 6;

/// Region volumes below this fraction of the free coordinates' box count as zero.
pub const FLAT_REL_VOLUME: f64 = 1e-12;

/// `{x : A x <= b}` in the free coordinates of one component.
#[derive(Debug, Clone)]
struct Region {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    dim: usize,
}

/// A component after elimination of its basic variables.
#[derive(Debug, Clone)]
struct Reduced {
    region: Region,
    log_abs_det: f64,
    /// Bounds of the free coordinates (used for sampling).
    free_lower: Vec<f64>,
    free_upper: Vec<f64>,
    /// Basic variable `k` equals `offset[k] - coeffs[k] . x_free`.
    offset: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
    basic_lower: Vec<f64>,
    basic_upper: Vec<f64>,
}

/// Splits into components with fixed variables substituted. Returns the log of
/// the product of widths of variables in no equation, and the reduced components.
fn decompose(sys: &LinearSystem, max_dim: usize) -> Result<(f64, Vec<Reduced>)> {
    let n = sys.n_vars();
    let fixed: Vec<bool> = (0..n).map(|i| sys.width(i) < PIN_WIDTH).collect();
    let value = |i: usize| 0.5 * (sys.lower()[i] + sys.upper()[i]);
    let graph = FactorGraph::build(sys);
    let mut log_free = 0.0;
    let mut out = Vec::new();
    for (vars, factors) in graph.components() {
        if factors.is_empty() {
            if !fixed[vars[0]] {
                log_free += sys.width(vars[0]).ln();
            }
            continue;
        }
        let cols: Vec<usize> = vars.iter().copied().filter(|&i| !fixed[i]).collect();
        let mut matrix = vec![vec![0.0; cols.len()]; factors.len()];
        let mut rhs: Vec<f64> = factors.iter().map(|&a| sys.rhs()[a]).collect();
        for (r, &a) in factors.iter().enumerate() {
            for e in graph.factor_edges(a) {
                let edge = graph.edge(e);
                if fixed[edge.var] {
                    rhs[r] -= edge.coeff * value(edge.var);
                } else {
                    let c = cols.binary_search(&edge.var).expect("component column");
                    matrix[r][c] = edge.coeff;
                }
            }
        }
        let red = rref(&matrix, &rhs, 1e-12);
        if red.rank() < factors.len() {
            let scale = 1.0 + rhs.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if red.inconsistency > DEFAULT_FEAS_TOL * scale {
                return Err(Error::Infeasible("equations are inconsistent".into()));
            }
            return Err(Error::RankDeficient {
                rank: red.rank(),
                rows: factors.len(),
            });
        }
        let free = red.free_columns();
        let dim = free.len();
        if dim > max_dim {
            return Err(Error::DimensionTooLarge { dim, max: max_dim });
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        let (mut free_lower, mut free_upper) = (Vec::new(), Vec::new());
        for (j, &f) in free.iter().enumerate() {
            let (lo, hi) = (sys.lower()[cols[f]], sys.upper()[cols[f]]);
            let mut unit = vec![0.0; dim];
            unit[j] = 1.0;
            a.push(unit.clone());
            b.push(hi);
            a.push(unit.iter().map(|v| -v).collect());
            b.push(-lo);
            free_lower.push(lo);
            free_upper.push(hi);
        }
        let (mut offset, mut coeffs, mut basic_lower, mut basic_upper) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (k, &p) in red.pivots.iter().enumerate() {
            let row: Vec<f64> = free.iter().map(|&f| red.rows[k][f]).collect();
            let (lo, hi) = (sys.lower()[cols[p]], sys.upper()[cols[p]]);
            // x_p = rhs_k - row . x  within [lo, hi].
            a.push(row.iter().map(|v| -v).collect());
            b.push(hi - red.rhs[k]);
            a.push(row.clone());
            b.push(red.rhs[k] - lo);
            offset.push(red.rhs[k]);
            coeffs.push(row);
            basic_lower.push(lo);
            basic_upper.push(hi);
        }
        out.push(Reduced {
            region: Region { a, b, dim },
            log_abs_det: red.log_abs_det,
            free_lower,
            free_upper,
            offset,
            coeffs,
            basic_lower,
            basic_upper,
        });
    }
    Ok((log_free, out))
}

struct Face {
    tight: u64,
    point: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

struct Lasserre<'a> {
    region: &'a Region,
    memo: HashMap<u64, f64>,
    tol: f64,
}

impl Lasserre<'_> {
    fn volume(&mut self, face: &Face) -> f64 {
        if let Some(&v) = self.memo.get(&face.tight) {
            return v;
        }
        let v = self.compute(face);
        self.memo.insert(face.tight, v);
        v
    }

    fn compute(&mut self, face: &Face) -> f64 {
        let k = face.basis.len();
        let m = self.region.a.len();
        // (constraint, projected normal, its norm, slack at the reference point)
        let mut cons: Vec<(usize, Vec<f64>, f64, f64)> = Vec::new();
        for i in 0..m {
            if face.tight & (1u64 << i) != 0 {
                continue;
            }
            let ai = &self.region.a[i];
            let g: Vec<f64> = face.basis.iter().map(|q| dot(q, ai)).collect();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = self.region.b[i] - dot(ai, &face.point);
            if gn < 1e-12 {
                if s < -self.tol {
                    return 0.0;
                }
                continue;
            }
            cons.push((i, g, gn, s));
        }
        if k == 1 {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (_, g, _, s) in &cons {
                let t = s / g[0];
                if g[0] > 0.0 {
                    hi = hi.min(t);
                } else {
                    lo = lo.max(t);
                }
            }
            return (hi - lo).max(0.0);
        }
        // Constraints defining the same hyperplane within the face count once.
        let mut keep = vec![true; cons.len()];
        for x in 0..cons.len() {
            if !keep[x] {
                continue;
            }
            for y in x + 1..cons.len() {
                let (_, gx, nx, sx) = &cons[x];
                let (_, gy, ny, sy) = &cons[y];
                let same_dir = gx.iter().zip(gy).all(|(u, v)| (u / nx - v / ny).abs() < 1e-9);
                if same_dir && (sx / nx - sy / ny).abs() < 1e-9 * (1.0 + (sx / nx).abs()) {
                    keep[y] = false;
                }
            }
        }
        let mut total = 0.0;
        for (idx, (i, g, gn, s)) in cons.iter().enumerate() {
            let h = s / gn;
            if !keep[idx] || h.abs() < 1e-15 {
                continue;
            }
            // Unit normal of the facet inside the face, in ambient coordinates.
            let mut w = vec![0.0; self.region.dim];
            for (q, gj) in face.basis.iter().zip(g) {
                for (wv, qv) in w.iter_mut().zip(q) {
                    *wv += gj / gn * qv;
                }
            }
            let point: Vec<f64> = face.point.iter().zip(&w).map(|(p, wv)| p + h * wv).collect();
            let mut reduced: Vec<Vec<f64>> = face
                .basis
                .iter()
                .map(|q| {
                    let c = dot(q, &w);
                    q.iter().zip(&w).map(|(qv, wv)| qv - c * wv).collect()
                })
                .collect();
            // The k projected vectors span k - 1 dimensions; the shortest is the
            // redundant one, so orthonormalize longest first and keep k - 1.
            reduced.sort_by(|x, y| dot(y, y).total_cmp(&dot(x, x)));
            let mut basis = orthonormalize(reduced, 1e-8);
            basis.truncate(k - 1);
            debug_assert_eq!(basis.len(), k - 1);
            let child = Face {
                tight: face.tight | (1u64 << i),
                point,
                basis,
            };
            total += h * self.volume(&child);
        }
        total / k as f64
    }
}

fn region_volume(region: &Region, center: &[f64]) -> Result<f64> {
    let d = region.dim;
    if d == 0 {
        let ok = region.b.iter().all(|&b| b >= -DEFAULT_FEAS_TOL);
        return Ok(if ok { 1.0 } else { 0.0 });
    }
    if region.a.len() > 64 {
        return Err(Error::DimensionTooLarge {
            dim: region.a.len() / 2,
            max: 32,
        });
    }
    let scale = 1.0 + region.b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut solver = Lasserre {
        region,
        memo: HashMap::new(),
        tol: 1e-12 * scale,
    };
    let basis = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            e
        })
        .collect();
    let face = Face {
        tight: 0,
        point: center.to_vec(),
        basis,
    };
    Ok(solver.volume(&face).max(0.0))
}

/// Natural log of the exact volume; `-inf` when the polytope is empty or flat.
pub fn exact_log_volume(sys: &LinearSystem, max_dim: usize) -> Result<f64> {
    let (mut log_v, comps) = decompose(sys, max_dim)?;
    for c in &comps {
        let center: Vec<f64> = c
            .free_lower
            .iter()
            .zip(&c.free_upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let v = region_volume(&c.region, &center)?;
        let box_v: f64 = c.free_lower.iter().zip(&c.free_upper).map(|(a, b)| b - a).product();
        // A flat region leaves only round-off in the recursion.
        let v = if v < FLAT_REL_VOLUME * box_v { 0.0 } else { v };
        log_v += v.ln() - c.log_abs_det;
    }
    Ok(log_v)
}

/// Exact volume with at most [`DEFAULT_MAX_DIM`] free coordinates per component.
pub fn exact_volume_small(sys: &LinearSystem) -> Result<f64> {
    Ok(exact_log_volume(sys, DEFAULT_MAX_DIM)?.exp())
}

/// Rejection estimate of the volume and its standard error, drawing the free
/// coordinates of every component uniformly in their boxes.
pub fn rejection_volume(sys: &LinearSystem, draws: usize, seed: u64, max_dim: usize) -> Result<(f64, f64)> {
    let (log_free, comps) = decompose(sys, max_dim)?;
    let mut rng = stream_rng(seed, Stream::Rejection);
    let mut log_scale = log_free;
    for c in &comps {
        log_scale += c
            .free_lower
            .iter()
            .zip(&c.free_upper)
            .map(|(a, b)| (b - a).ln())
            .sum::<f64>()
            - c.log_abs_det;
    }
    let mut hits = 0usize;
    let mut x = Vec::new();
    for _ in 0..draws {
        let mut inside = true;
        for c in &comps {
            x.clear();
            x.extend(
                c.free_lower
                    .iter()
                    .zip(&c.free_upper)
                    .map(|(&a, &b)| if b > a { rng.random_range(a..b) } else { a }),
            );
            for k in 0..c.offset.len() {
                let v = c.offset[k] - dot(&c.coeffs[k], &x);
                if v < c.basic_lower[k] || v > c.basic_upper[k] {
                    inside = false;
                    break;
                }
            }
            if !inside {
                break;
            }
        }
        hits += inside as usize;
    }
    let p = hits as f64 / draws as f64;
    let scale = log_scale.exp();
    Ok((p * scale, (p * (1.0 - p) / draws as f64).sqrt() * scale))
}
