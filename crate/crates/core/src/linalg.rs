//! Dense row reduction for small and medium systems.

/// Reduced row-echelon form of `[A | y]` with full pivoting.
#[derive(Debug, Clone)]
pub struct Rref {
    /// Pivot column of each nonzero row, in row order.
    pub pivots: Vec<usize>,
    /// Rows of the reduced matrix, one per pivot; entry `[k][c_k]` is 1.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// `sum ln|pivot|`, i.e. `ln|det|` of the pivot-column block.
    pub log_abs_det: f64,
    /// Largest residual among the rows eliminated as dependent.
    pub inconsistency: f64,
    pub n_cols: usize,
}

impl Rref {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn free_columns(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.n_cols];
        for &c in &self.pivots {
            is_pivot[c] = true;
        }
        (0..self.n_cols).filter(|&c| !is_pivot[c]).collect()
    }

    /// Solution with all free columns at zero.
    pub fn particular(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_cols];
        for (k, &c) in self.pivots.iter().enumerate() {
            x[c] = self.rhs[k];
        }
        x
    }

    /// One null-space vector per free column (not orthonormalized).
    pub fn null_vectors(&self) -> Vec<Vec<f64>> {
        self.free_columns()
            .into_iter()
            .map(|f| {
                let mut v = vec![0.0; self.n_cols];
                v[f] = 1.0;
                for (k, &c) in self.pivots.iter().enumerate() {
                    v[c] = -self.rows[k][f];
                }
                v
            })
            .collect()
    }
}

/// Row-reduces `a` (rows of equal length) with right-hand side `y`.
///
/// Pivots smaller than `tol` times the largest entry count as zero.
pub fn rref(a: &[Vec<f64>], y: &[f64], tol: f64) -> Rref {
    let n_rows = a.len();
    let n_cols = a.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = y.to_vec();
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let eps = tol * scale.max(f64::MIN_POSITIVE);
    let mut pivots = Vec::new();
    let mut log_abs_det = 0.0;
    let mut used_col = vec![false; n_cols];
    for r in 0..n_rows {
        let mut best = (0.0, r, 0);
        for (i, row) in m.iter().enumerate().skip(r) {
            for (c, v) in row.iter().enumerate() {
                if !used_col[c] && v.abs() > best.0 {
                    best = (v.abs(), i, c);
                }
            }
        }
        let (mag, pr, pc) = best;
        if mag <= eps {
            break;
        }
        m.swap(r, pr);
        rhs.swap(r, pr);
        let p = m[r][pc];
        log_abs_det += p.abs().ln();
        for v in m[r].iter_mut() {
            *v /= p;
        }
        rhs[r] /= p;
        let pivot_row = m[r].clone();
        let pivot_rhs = rhs[r];
        for i in 0..n_rows {
            if i != r {
                let f = m[i][pc];
                if f != 0.0 {
                    for (v, pv) in m[i].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                    m[i][pc] = 0.0;
                    rhs[i] -= f * pivot_rhs;
                }
            }
        }
        used_col[pc] = true;
        pivots.push(pc);
    }
    let rank = pivots.len();
    let inconsistency = rhs[rank..].iter().fold(0.0f64, |s, v| s.max(v.abs()));
    m.truncate(rank);
    rhs.truncate(rank);
    Rref {
        pivots,
        rows: m,
        rhs,
        log_abs_det,
        inconsistency,
        n_cols,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram-Schmidt with one reorthogonalization pass; drops vectors
/// whose remaining norm falls below `tol` times their original norm.
pub fn orthonormalize(vectors: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        let n0 = norm(&v);
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&v, q);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
        let n = norm(&v);
        if n > tol * n0 {
            for x in v.iter_mut() {
                *x /= n;
            }
            basis.push(v);
        }
    }
    basis
}
