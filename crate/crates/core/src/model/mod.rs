//! Box-bounded linear systems `S x = y, a <= x <= b` and their factor graphs.

mod graph;
pub mod io;
pub mod preprocess;

pub use graph::{Edge, FactorGraph};
pub use io::{load_system, Format};
pub use preprocess::{
    add_drains, eliminate_fixed, exact_bounds, merge_mirrors, reduce_intervals, Elimination, DEFAULT_FEAS_TOL,
    PIN_WIDTH,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One nonzero coefficient `S[eq][var]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub eq: usize,
    pub var: usize,
    pub coeff: f64,
}

/// A validated system `S x = y` with per-variable bounds.
///
/// Entries are kept sorted by `(eq, var)`; the struct is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    n_vars: usize,
    n_eqs: usize,
    entries: Vec<Term>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    var_names: Option<Vec<String>>,
    eq_names: Option<Vec<String>>,
}

impl LinearSystem {
    /// Builds and validates a system. `rhs.len()` fixes the number of equations.
    pub fn new(
        n_vars: usize,
        mut entries: Vec<Term>,
        rhs: Vec<f64>,
        mut lower: Vec<f64>,
        mut upper: Vec<f64>,
    ) -> Result<Self> {
        let n_eqs = rhs.len();
        // No signed zeros in bounds.
        lower.iter_mut().chain(upper.iter_mut()).for_each(|v| *v += 0.0);
        if lower.len() != n_vars || upper.len() != n_vars {
            return Err(Error::Parameter(format!(
                "expected {n_vars} bounds, got {} lower and {} upper",
                lower.len(),
                upper.len()
            )));
        }
        for i in 0..n_vars {
            if !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(Error::Invariant {
                    index: i,
                    message: "bounds must be finite".into(),
                });
            }
            if lower[i] > upper[i] {
                return Err(Error::Invariant {
                    index: i,
                    message: format!("lower bound {} exceeds upper bound {}", lower[i], upper[i]),
                });
            }
        }
        for (a, y) in rhs.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::Invariant {
                    index: a,
                    message: "right-hand side must be finite".into(),
                });
            }
        }
        entries.sort_by_key(|t| (t.eq, t.var));
        let mut seen_eq = vec![false; n_eqs];
        for (k, t) in entries.iter().enumerate() {
            if t.eq >= n_eqs {
                return Err(Error::Invariant {
                    index: t.eq,
                    message: format!("equation index out of range (n_eqs = {n_eqs})"),
                });
            }
            if t.var >= n_vars {
                return Err(Error::Invariant {
                    index: t.var,
                    message: format!("variable index out of range (n_vars = {n_vars})"),
                });
            }
            if t.coeff == 0.0 || !t.coeff.is_finite() {
                return Err(Error::Invariant {
                    index: t.eq,
                    message: format!("coefficient for variable {} must be finite and nonzero", t.var),
                });
            }
            if k > 0 && entries[k - 1].eq == t.eq && entries[k - 1].var == t.var {
                return Err(Error::Invariant {
                    index: t.eq,
                    message: format!("duplicate entry for variable {}", t.var),
                });
            }
            seen_eq[t.eq] = true;
        }
        if let Some(a) = seen_eq.iter().position(|s| !s) {
            return Err(Error::EmptyEquation(a));
        }
        Ok(Self {
            n_vars,
            n_eqs,
            entries,
            rhs,
            lower,
            upper,
            var_names: None,
            eq_names: None,
        })
    }

    pub fn with_var_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_vars {
            return Err(Error::Parameter(format!(
                "{} variable names for {} variables",
                names.len(),
                self.n_vars
            )));
        }
        self.var_names = Some(names);
        Ok(self)
    }

    pub fn with_eq_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_eqs {
            return Err(Error::Parameter(format!(
                "{} equation names for {} equations",
                names.len(),
                self.n_eqs
            )));
        }
        self.eq_names = Some(names);
        Ok(self)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_eqs(&self) -> usize {
        self.n_eqs
    }

    pub fn entries(&self) -> &[Term] {
        &self.entries
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn var_names(&self) -> Option<&[String]> {
        self.var_names.as_deref()
    }

    pub fn eq_names(&self) -> Option<&[String]> {
        self.eq_names.as_deref()
    }

    /// Name of variable `i`, falling back to `x{i}`.
    pub fn var_name(&self, i: usize) -> String {
        self.var_names
            .as_ref()
            .map(|n| n[i].clone())
            .unwrap_or_else(|| format!("x{i}"))
    }

    pub fn eq_name(&self, a: usize) -> String {
        self.eq_names
            .as_ref()
            .map(|n| n[a].clone())
            .unwrap_or_else(|| format!("e{a}"))
    }

    /// Width `b_i - a_i` of variable `i`'s box.
    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Dense row-major copy of `S` (for small oracle computations).
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n_vars]; self.n_eqs];
        for t in &self.entries {
            m[t.eq][t.var] = t.coeff;
        }
        m
    }

    /// `S x - y` for a point `x`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.rhs.iter().map(|y| -y).collect();
        for t in &self.entries {
            r[t.eq] += t.coeff * x[t.var];
        }
        r
    }

    /// Whether `x` satisfies the equations within `eq_tol` and the box within `box_tol`.
    pub fn is_feasible(&self, x: &[f64], eq_tol: f64, box_tol: f64) -> bool {
        x.len() == self.n_vars
            && x.iter()
                .enumerate()
                .all(|(i, v)| *v >= self.lower[i] - box_tol && *v <= self.upper[i] + box_tol)
            && self.residual(x).iter().all(|r| r.abs() <= eq_tol)
    }

    /// Same system with new bounds.
    pub fn with_bounds(&self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let mut sys = Self::new(self.n_vars, self.entries.clone(), self.rhs.clone(), lower, upper)?;
        sys.var_names = self.var_names.clone();
        sys.eq_names = self.eq_names.clone();
        Ok(sys)
    }

    /// Same system with a new right-hand side.
    pub fn with_rhs(&self, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != self.n_eqs {
            return Err(Error::Parameter(format!(
                "{} right-hand side values for {} equations",
                rhs.len(),
                self.n_eqs
            )));
        }
        let mut sys = self.clone();
        sys.rhs = rhs;
        Ok(sys)
    }

    /// Keeps only the variables for which `keep` is true, renumbering the rest.
    ///
    /// Fails with [`Error::EmptyEquation`] if an equation loses all its terms.
    pub fn retain_vars(&self, keep: &[bool]) -> Result<Self> {
        let mut new_index = vec![usize::MAX; self.n_vars];
        let mut count = 0;
        for i in 0..self.n_vars {
            if keep[i] {
                new_index[i] = count;
                count += 1;
            }
        }
        let entries = self
            .entries
            .iter()
            .filter(|t| keep[t.var])
            .map(|t| Term {
                var: new_index[t.var],
                ..*t
            })
            .collect();
        let pick = |v: &[f64]| -> Vec<f64> { (0..self.n_vars).filter(|&i| keep[i]).map(|i| v[i]).collect() };
        let mut sys = Self::new(count, entries, self.rhs.clone(), pick(&self.lower), pick(&self.upper))?;
        sys.var_names = self
            .var_names
            .as_ref()
            .map(|n| (0..self.n_vars).filter(|&i| keep[i]).map(|i| n[i].clone()).collect());
        sys.eq_names = self.eq_names.clone();
        Ok(sys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(eq: usize, var: usize, coeff: f64) -> Term {
        Term { eq, var, coeff }
    }

    #[test]
    fn rejects_inverted_bounds() {
        let err = LinearSystem::new(1, vec![term(0, 0, 1.0)], vec![0.0], vec![1.0], vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::Invariant { index: 0, .. }));
    }

    #[test]
    fn rejects_duplicates_and_zero_coefficients() {
        let dup = LinearSystem::new(
            2,
            vec![term(0, 1, 1.0), term(0, 1, 2.0)],
            vec![0.0],
            vec![0.0; 2],
            vec![1.0; 2],
        );
        assert!(matches!(dup, Err(Error::Invariant { .. })));
        let zero = LinearSystem::new(1, vec![term(0, 0, 0.0)], vec![0.0], vec![0.0], vec![1.0]);
        assert!(matches!(zero, Err(Error::Invariant { .. })));
    }

    #[test]
    fn rejects_empty_equation() {
        let err = LinearSystem::new(2, vec![term(0, 0, 1.0)], vec![0.0, 0.0], vec![0.0; 2], vec![1.0; 2]).unwrap_err();
        assert!(matches!(err, Error::EmptyEquation(1)));
    }

    #[test]
    fn residual_and_feasibility() {
        let sys = LinearSystem::new(
            2,
            vec![term(0, 0, 1.0), term(0, 1, -1.0)],
            vec![0.0],
            vec![0.0; 2],
            vec![1.0; 2],
        )
        .unwrap();
        assert!(sys.is_feasible(&[0.3, 0.3], 1e-12, 0.0));
        assert!(!sys.is_feasible(&[0.3, 0.4], 1e-12, 0.0));
        assert!(!sys.is_feasible(&[1.3, 1.3], 1e-12, 0.0));
    }
}
