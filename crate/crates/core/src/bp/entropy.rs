use serde::{Deserialize, Serialize};

use super::BpState;
use crate::beta::kernel::KernelProduct;
use crate::beta::{log_weighted_sum_density_at, BetaMessage};
use crate::error::Result;
use crate::quad::QuadConfig;

#[derive(Debug, Clone, Copy, Default)]
pub struct EntropyOptions {
    /// Fold the terms of each factor in reverse order when evaluating its
    /// weighted-sum density.
    pub reverse_fold: bool,
}

/// Bethe log-volume and its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// Log-volume in nats.
    pub h: f64,
    /// `H_a` for each factor left after elimination.
    pub factor_terms: Vec<f64>,
    /// Original equation index of each entry of `factor_terms`.
    pub factor_eqs: Vec<usize>,
    /// `H_i` for each variable left after elimination (0 when its degree is at most 1).
    pub var_terms: Vec<f64>,
    pub var_degrees: Vec<usize>,
    /// `sum ln(b_i - a_i)` over variables in no equation.
    pub free_term: f64,
    /// `-sum ln|S_ai|` over equations that pinned a single variable.
    pub jacobian_term: f64,
    pub converged: bool,
    pub iterations: usize,
    pub last_delta: f64,
    /// A belief or factor collapsed to a point, so some terms are undefined.
    pub degenerate: bool,
}

impl EntropyReport {
    pub fn volume(&self) -> f64 {
        self.h.exp()
    }
}

fn quad_cfg() -> QuadConfig {
    QuadConfig::with_tol(1e-12, 1e-9)
}

/// Belief kernel of one variable: product of its incoming messages on their
/// common support.
fn belief(msgs: &[BetaMessage], lo: f64, hi: f64) -> Option<KernelProduct> {
    if msgs.iter().any(BetaMessage::is_point) {
        return None;
    }
    let a = msgs.iter().fold(lo, |m, msg| m.max(msg.lower()));
    let b = msgs.iter().fold(hi, |m, msg| m.min(msg.upper()));
    (b > a).then(|| KernelProduct::new(msgs.iter().map(BetaMessage::kernel_term).collect(), a, b))
}

/// `-int b ln b` for the normalized belief.
fn differential_entropy(b: &KernelProduct) -> Option<f64> {
    let r = b.integrate(
        |x, p| {
            let lp = if p > 0.0 { p * b.log_value(x) } else { 0.0 };
            [p, lp]
        },
        &quad_cfg(),
    );
    let z = r.value[0];
    if !(z > 0.0) {
        return None;
    }
    // log_value = log_peak + ln p, so E[ln b] = E[log_value] - ln Z_b.
    let e_log = r.value[1] / z;
    let log_z = r.log_peak + z.ln();
    Some(log_z - e_log)
}

/// `int b ln n` for the normalized belief `b`.
fn cross_term(b: &KernelProduct, n: &BetaMessage) -> Option<f64> {
    if n.alpha() == 1.0 && n.beta() == 1.0 {
        return Some(-n.width().ln());
    }
    let r = b.integrate(
        |x, p| {
            let v = if p > 0.0 { p * n.log_density(x) } else { 0.0 };
            [p, v]
        },
        &quad_cfg(),
    );
    (r.value[0] > 0.0).then(|| r.value[1] / r.value[0])
}

pub(super) fn entropy(state: &BpState, options: &EntropyOptions) -> Result<EntropyReport> {
    let sys = state.reduced_system();
    let graph = state.graph();
    let mut degenerate = false;

    let beliefs: Vec<Option<KernelProduct>> = (0..graph.n_vars())
        .map(|i| {
            let (lo, hi) = state.reduced_bounds(i);
            let mut msgs = state.incoming(i);
            if msgs.is_empty() {
                msgs.push(BetaMessage::uniform(lo, hi));
            }
            belief(&msgs, lo, hi)
        })
        .collect();

    let mut free_term = 0.0;
    let mut var_terms = vec![0.0; graph.n_vars()];
    let mut var_degrees = vec![0; graph.n_vars()];
    for i in 0..graph.n_vars() {
        let d = graph.var_degree(i);
        var_degrees[i] = d;
        if d == 0 {
            free_term += sys.width(i).ln();
        } else if d >= 2 {
            match beliefs[i].as_ref().and_then(differential_entropy) {
                Some(h) => var_terms[i] = h,
                None => degenerate = true,
            }
        }
    }

    let mut factor_terms = Vec::with_capacity(graph.n_factors());
    for a in 0..graph.n_factors() {
        let mut terms: Vec<(f64, BetaMessage)> = graph
            .factor_edges(a)
            .map(|e| (graph.edge(e).coeff, *state.var_message_on(e)))
            .collect();
        if options.reverse_fold {
            terms.reverse();
        }
        let log_z = log_weighted_sum_density_at(&terms, sys.rhs()[a]);
        if !log_z.is_finite() {
            degenerate = true;
        }
        let mut cross = 0.0;
        for e in graph.factor_edges(a) {
            let i = graph.edge(e).var;
            let n = state.var_message_on(e);
            match beliefs[i].as_ref().and_then(|b| cross_term(b, n)) {
                Some(c) => cross += c,
                None => degenerate = true,
            }
        }
        factor_terms.push(log_z - cross);
    }

    let jacobian_term = state.elimination().log_jacobian;
    let h = factor_terms.iter().sum::<f64>()
        - var_terms
            .iter()
            .zip(&var_degrees)
            .map(|(h, &d)| (d as f64 - 1.0).max(0.0) * h)
            .sum::<f64>()
        + free_term
        + jacobian_term;

    Ok(EntropyReport {
        h,
        factor_terms,
        factor_eqs: state.elimination().eq_map.clone(),
        var_terms,
        var_degrees,
        free_term,
        jacobian_term,
        converged: state.converged(),
        iterations: state.iteration(),
        last_delta: state.last_delta(),
        degenerate,
    })
}
