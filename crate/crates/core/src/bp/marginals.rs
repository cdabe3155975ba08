use std::io::Write;

use serde::Serialize;

use super::BpState;
use crate::beta::kernel::KernelProduct;
use crate::beta::{product_moments, BetaMessage};
use crate::error::{Error, Result};
use crate::quad::QuadConfig;

/// Belief of one variable: the normalized product of its incoming factor
/// messages, with moments by quadrature and a moment-matched Beta shape.
#[derive(Debug, Clone, Serialize)]
pub struct Marginal {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub mean: f64,
    pub variance: f64,
    pub shape: BetaMessage,
    #[serde(skip)]
    factors: Vec<BetaMessage>,
    #[serde(skip)]
    log_norm: f64,
}

impl Marginal {
    fn point(name: String, x: f64) -> Self {
        Self {
            name,
            lower: x,
            upper: x,
            mean: x,
            variance: 0.0,
            shape: BetaMessage::point(x),
            factors: Vec::new(),
            log_norm: f64::INFINITY,
        }
    }

    fn from_messages(name: String, msgs: Vec<BetaMessage>, lo: f64, hi: f64) -> Result<Self> {
        if let Some(p) = msgs.iter().find(|m| m.is_point()) {
            return Ok(Self::point(name, p.mean()));
        }
        let pm = product_moments(&msgs, lo, hi)?;
        if pm.lower == pm.upper {
            return Ok(Self::point(name, pm.mean));
        }
        Ok(Self {
            name,
            lower: pm.lower,
            upper: pm.upper,
            mean: pm.mean,
            variance: pm.variance,
            shape: BetaMessage::fit(pm.mean, pm.variance, pm.lower, pm.upper),
            factors: msgs,
            log_norm: pm.log_norm,
        })
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    /// Incoming factor messages whose product is the belief.
    pub fn factors(&self) -> &[BetaMessage] {
        &self.factors
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if self.is_point() || !(x >= self.lower && x <= self.upper) {
            return f64::NEG_INFINITY;
        }
        self.factors.iter().map(|m| m.log_density(x)).sum::<f64>() - self.log_norm
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Probability of `[lo, hi]`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if self.is_point() {
            return if self.mean >= lo && self.mean <= hi { 1.0 } else { 0.0 };
        }
        let a = lo.max(self.lower);
        let b = hi.min(self.upper);
        if !(b > a) {
            return 0.0;
        }
        let product = KernelProduct::new(self.factors.iter().map(|m| m.kernel_term()).collect(), a, b);
        let r = product.integrate(|_, p| [p], &QuadConfig::with_tol(1e-12, 1e-10));
        (r.log_peak - self.log_norm).exp() * r.value[0]
    }

    /// Probabilities of consecutive bins delimited by `edges`.
    pub fn bin_masses(&self, edges: &[f64]) -> Vec<f64> {
        edges.windows(2).map(|w| self.mass(w[0], w[1])).collect()
    }
}

/// Beliefs of all variables of the input system, in input order.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalSet {
    pub marginals: Vec<Marginal>,
    pub converged: bool,
    pub iterations: usize,
}

impl MarginalSet {
    pub fn len(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginals.is_empty()
    }

    pub fn get(&self, i: usize) -> &Marginal {
        &self.marginals[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Marginal> {
        self.marginals.iter()
    }

    pub fn means(&self) -> Vec<f64> {
        self.marginals.iter().map(|m| m.mean).collect()
    }

    /// CSV with columns `name,A,B,alpha,beta,mean,variance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "A", "B", "alpha", "beta", "mean", "variance"])?;
        for m in &self.marginals {
            w.serialize((
                &m.name,
                m.lower,
                m.upper,
                m.shape.alpha(),
                m.shape.beta(),
                m.mean,
                m.variance,
            ))?;
        }
        w.flush().map_err(Error::from)
    }
}

pub(super) fn marginals(state: &BpState) -> Result<MarginalSet> {
    let working = state.working_system();
    let elim = state.elimination();
    let mut out: Vec<Option<Marginal>> = vec![None; working.n_vars()];
    for (v, pinned) in elim.pinned.iter().enumerate() {
        if let Some(x) = pinned {
            out[v] = Some(Marginal::point(working.var_name(v), *x));
        }
    }
    for (i, &v) in elim.var_map.iter().enumerate() {
        let (lo, hi) = state.reduced_bounds(i);
        let mut msgs = state.incoming(i);
        if msgs.is_empty() {
            msgs.push(BetaMessage::uniform(lo, hi));
        }
        out[v] = Some(Marginal::from_messages(working.var_name(v), msgs, lo, hi)?);
    }
    Ok(MarginalSet {
        marginals: out
            .into_iter()
            .map(|m| m.expect("every variable is pinned or kept"))
            .collect(),
        converged: state.converged(),
        iterations: state.iteration(),
    })
}
