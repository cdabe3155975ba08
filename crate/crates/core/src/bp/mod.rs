//! Belief propagation with truncated generalized Beta messages.
//!
//! Each factor `a` (equation `sum_j S_aj x_j = y_a`) sends variable `i` the
//! law of `(y_a - sum_{j != i} S_aj x_j) / S_ai` with `x_j ~ n_{j->a}`: means and
//! variances add, the support follows by interval arithmetic, and the result is
//! moment-matched to a Beta and truncated to the box of `x_i`. Each variable
//! sends factor `a` the normalized product of its other incoming factor
//! messages, again moment-matched.
//!
//! Before iterating, the input system's bounds are optionally tightened with
//! [`reduce_intervals`](crate::model::reduce_intervals) and fixed variables are
//! eliminated (see [`eliminate_fixed`](crate::model::eliminate_fixed)); both
//! steps leave the solution set unchanged.

mod entropy;
mod marginals;

pub use entropy::{EntropyOptions, EntropyReport};
pub use marginals::{Marginal, MarginalSet};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{product_moments, truncated_moments, BetaMessage};
use crate::error::{Error, Result};
use crate::model::{
    eliminate_fixed, exact_bounds, reduce_intervals, Elimination, FactorGraph, LinearSystem, DEFAULT_FEAS_TOL,
    PIN_WIDTH,
};
use crate::rng::{stream_rng, Stream};

/// Order in which messages are refreshed within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Factors visited in a fresh seeded permutation each sweep; before a factor
    /// sends, its incoming variable messages are recomputed from the latest
    /// factor messages.
    #[default]
    Sequential,
    /// All factor messages from the previous variable messages, then all
    /// variable messages from the new factor messages. Order-free, so each
    /// phase runs in parallel.
    Synchronous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpConfig {
    /// Weight of the previous factor message, in `[0, 1)`.
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub schedule: Schedule,
    pub seed: u64,
    /// Tighten bounds by interval propagation before iterating.
    pub reduce_bounds: bool,
    pub reduce_rounds: usize,
    /// Then tighten every box to its variable's exact range by linear programming.
    pub exact_bounds: bool,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            damping: 0.0,
            max_iter: 1000,
            tol: 1e-7,
            schedule: Schedule::Sequential,
            seed: 0,
            reduce_bounds: true,
            reduce_rounds: 200,
            exact_bounds: false,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Parameter(format!("damping {} outside [0, 1)", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!("tolerance {} must be positive", self.tol)));
        }
        Ok(())
    }
}

/// Pre-truncation law of a factor-to-variable message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Messages on every edge plus iteration bookkeeping.
#[derive(Debug, Clone)]
pub struct BpState {
    /// Input system after optional bound tightening (original variable indexing).
    working: LinearSystem,
    elim: Elimination,
    graph: FactorGraph,
    f2v: Vec<BetaMessage>,
    v2f: Vec<BetaMessage>,
    iteration: usize,
    last_delta: f64,
    converged: bool,
    config: BpConfig,
    scheduler: ChaCha8Rng,
}

fn delta(old: &BetaMessage, new: &BetaMessage, box_width: f64) -> f64 {
    let scale = if new.is_point() { box_width } else { new.width() };
    let dmu = (new.mean() - old.mean()).abs() / scale;
    let dsd = (new.variance().sqrt() - old.variance().sqrt()).abs() / scale;
    let da = (new.lower() - old.lower()).abs() / box_width;
    let db = (new.upper() - old.upper()).abs() / box_width;
    dmu.max(dsd).max(da).max(db)
}

/// Slack allowed when supports meet. Messages collapse to points once their
/// standard deviation is about `1e-7` of the box, so point masses can sit that
/// far from the exact solution.
fn overlap_tol(lo: f64, hi: f64) -> f64 {
    (DEFAULT_FEAS_TOL * (1.0 + lo.abs().max(hi.abs()))).max(1e-6 * (hi - lo))
}

/// Moment-matches a projection and truncates it to `[lo, hi]`.
fn project_into_box(p: &Projection, lo: f64, hi: f64) -> Result<BetaMessage> {
    let a = p.lower.max(lo);
    let b = p.upper.min(hi);
    let tol = overlap_tol(lo, hi);
    if a > b + tol {
        return Err(Error::EmptyOverlap { lo, hi });
    }
    if b - a < PIN_WIDTH {
        return Ok(BetaMessage::point(0.5 * (a + b)));
    }
    let msg = BetaMessage::fit(p.mean, p.variance, p.lower, p.upper);
    if msg.is_point() {
        return Ok(BetaMessage::point(msg.mean().clamp(a, b)));
    }
    if msg.within(lo, hi) {
        return Ok(msg);
    }
    let (mu, var) = match truncated_moments(&msg, a, b) {
        Ok(m) => m,
        // All mass of the matched Beta sits outside the box: keep the support only.
        Err(Error::NumericalUnderflow { .. }) => {
            let u = BetaMessage::uniform(a, b);
            (u.mean(), u.variance())
        }
        Err(e) => return Err(e),
    };
    Ok(BetaMessage::fit(mu, var, a, b))
}

fn damp(old: &BetaMessage, new: BetaMessage, d: f64) -> BetaMessage {
    if d == 0.0 {
        return new;
    }
    let mix = |o: f64, n: f64| d * o + (1.0 - d) * n;
    let lower = mix(old.lower(), new.lower());
    let upper = mix(old.upper(), new.upper());
    BetaMessage::fit(
        mix(old.mean(), new.mean()),
        mix(old.variance(), new.variance()),
        lower,
        upper,
    )
}

impl BpState {
    /// Prepares the system and sets every message to the uniform law on its
    /// variable's box.
    pub fn init(sys: &LinearSystem, config: &BpConfig) -> Result<Self> {
        config.validate()?;
        let mut working = if config.reduce_bounds {
            reduce_intervals(sys, config.reduce_rounds, DEFAULT_FEAS_TOL)?
        } else {
            sys.clone()
        };
        if config.exact_bounds {
            working = exact_bounds(&working, DEFAULT_FEAS_TOL)?;
        }
        let elim = eliminate_fixed(&working, PIN_WIDTH, DEFAULT_FEAS_TOL)?;
        let graph = FactorGraph::build(&elim.system);
        let uniform: Vec<BetaMessage> = graph
            .edges()
            .iter()
            .map(|e| BetaMessage::uniform(elim.system.lower()[e.var], elim.system.upper()[e.var]))
            .collect();
        Ok(Self {
            working,
            elim,
            graph,
            f2v: uniform.clone(),
            v2f: uniform,
            iteration: 0,
            last_delta: f64::INFINITY,
            converged: false,
            config: *config,
            scheduler: stream_rng(config.seed, Stream::Scheduler),
        })
    }

    /// Like [`init`](Self::init) but starts from `previous`'s messages when the
    /// reduced factor graphs coincide, truncating them to the new boxes.
    pub fn init_warm(sys: &LinearSystem, config: &BpConfig, previous: &BpState) -> Result<Self> {
        let mut state = Self::init(sys, config)?;
        let same_graph = state.elim.var_map == previous.elim.var_map
            && state.elim.eq_map == previous.elim.eq_map
            && state.graph == previous.graph;
        if !same_graph {
            return Ok(state);
        }
        for e in 0..state.graph.n_edges() {
            let i = state.graph.edge(e).var;
            let (lo, hi) = state.bounds(i);
            let old = previous.f2v[e];
            state.f2v[e] = if old.within(lo, hi) {
                old
            } else {
                let p = Projection {
                    mean: old.mean(),
                    variance: old.variance(),
                    lower: old.lower(),
                    upper: old.upper(),
                };
                project_into_box(&p, lo, hi)?
            };
        }
        for i in 0..state.graph.n_vars() {
            for &e in state.graph.var_edges(i) {
                state.v2f[e] = state.var_message(e)?;
            }
        }
        Ok(state)
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        (self.elim.system.lower()[i], self.elim.system.upper()[i])
    }

    pub fn config(&self) -> &BpConfig {
        &self.config
    }

    /// Input system after bound tightening.
    pub fn working_system(&self) -> &LinearSystem {
        &self.working
    }

    /// System the messages live on, after eliminating fixed variables.
    pub fn reduced_system(&self) -> &LinearSystem {
        &self.elim.system
    }

    pub fn elimination(&self) -> &Elimination {
        &self.elim
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn n_messages(&self) -> usize {
        self.f2v.len() + self.v2f.len()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn last_delta(&self) -> f64 {
        self.last_delta
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Factor-to-variable message on edge `e`.
    pub fn factor_message(&self, e: usize) -> &BetaMessage {
        &self.f2v[e]
    }

    /// Variable-to-factor message on edge `e`.
    pub fn var_message_on(&self, e: usize) -> &BetaMessage {
        &self.v2f[e]
    }

    /// Pre-truncation laws of all messages leaving factor `a`, keyed by edge.
    pub fn factor_projections(&self, a: usize) -> Vec<(usize, Projection)> {
        let y = self.elim.system.rhs()[a];
        let edges = self.graph.factor_edges(a);
        let (mut tot_mu, mut tot_var, mut tot_lo, mut tot_hi) = (0.0, 0.0, 0.0, 0.0);
        let mut parts = Vec::with_capacity(edges.len());
        for e in edges.clone() {
            let c = self.graph.edge(e).coeff;
            let n = &self.v2f[e];
            let mu = c * n.mean();
            let var = c * c * n.variance();
            let (l, h) = if c > 0.0 {
                (c * n.lower(), c * n.upper())
            } else {
                (c * n.upper(), c * n.lower())
            };
            tot_mu += mu;
            tot_var += var;
            tot_lo += l;
            tot_hi += h;
            parts.push((e, c, mu, var, l, h));
        }
        parts
            .into_iter()
            .map(|(e, c, mu, var, l, h)| {
                let rest_mu = tot_mu - mu;
                let rest_var = (tot_var - var).max(0.0);
                let rest_lo = tot_lo - l;
                let rest_hi = (tot_hi - h).max(rest_lo);
                let (lower, upper) = if c > 0.0 {
                    ((y - rest_hi) / c, (y - rest_lo) / c)
                } else {
                    ((y - rest_lo) / c, (y - rest_hi) / c)
                };
                (
                    e,
                    Projection {
                        mean: (y - rest_mu) / c,
                        variance: rest_var / (c * c),
                        lower,
                        upper: upper.max(lower),
                    },
                )
            })
            .collect()
    }

    /// New messages from factor `a`, damped against the current ones.
    fn factor_messages(&self, a: usize) -> Result<Vec<(usize, BetaMessage)>> {
        self.factor_projections(a)
            .into_iter()
            .map(|(e, p)| {
                let (lo, hi) = self.bounds(self.graph.edge(e).var);
                let msg = project_into_box(&p, lo, hi).map_err(|err| match err {
                    Error::EmptyOverlap { .. } => Error::Infeasible(format!(
                        "equation {} admits no value of {} within its bounds",
                        self.elim.system.eq_name(a),
                        self.elim.system.var_name(self.graph.edge(e).var)
                    )),
                    other => other,
                })?;
                Ok((e, damp(&self.f2v[e], msg, self.config.damping)))
            })
            .collect()
    }

    /// Recomputes the message from factor `a` to variable `i` (reduced indices).
    pub fn update_factor_to_var(&self, a: usize, i: usize) -> Result<BetaMessage> {
        let e = self
            .graph
            .edge_between(a, i)
            .ok_or_else(|| Error::Parameter(format!("no edge between factor {a} and variable {i}")))?;
        Ok(self
            .factor_messages(a)?
            .into_iter()
            .find(|(id, _)| *id == e)
            .map(|(_, m)| m)
            .expect("edge belongs to factor"))
    }

    /// Message from variable to factor along edge `e`.
    fn var_message(&self, e: usize) -> Result<BetaMessage> {
        let i = self.graph.edge(e).var;
        let (lo, hi) = self.bounds(i);
        let others: Vec<BetaMessage> = self
            .graph
            .var_edges(i)
            .iter()
            .filter(|&&f| f != e)
            .map(|&f| self.f2v[f])
            .collect();
        combine(&others, lo, hi).map_err(|err| match err {
            Error::EmptyOverlap { .. } => Error::Infeasible(format!(
                "incoming messages of {} have disjoint supports",
                self.elim.system.var_name(i)
            )),
            other => other,
        })
    }

    /// Recomputes the message from variable `i` to factor `a` (reduced indices).
    pub fn update_var_to_factor(&self, i: usize, a: usize) -> Result<BetaMessage> {
        let e = self
            .graph
            .edge_between(a, i)
            .ok_or_else(|| Error::Parameter(format!("no edge between factor {a} and variable {i}")))?;
        self.var_message(e)
    }

    fn box_width(&self, e: usize) -> f64 {
        let (lo, hi) = self.bounds(self.graph.edge(e).var);
        hi - lo
    }

    /// One pass over all messages; returns the largest normalized change.
    pub fn sweep(&mut self) -> Result<f64> {
        let mut max_delta: f64 = 0.0;
        match self.config.schedule {
            Schedule::Sequential => {
                let mut order: Vec<usize> = (0..self.graph.n_factors()).collect();
                order.shuffle(&mut self.scheduler);
                for a in order {
                    for e in self.graph.factor_edges(a) {
                        let msg = self.var_message(e)?;
                        max_delta = max_delta.max(delta(&self.v2f[e], &msg, self.box_width(e)));
                        self.v2f[e] = msg;
                    }
                    for (e, msg) in self.factor_messages(a)? {
                        max_delta = max_delta.max(delta(&self.f2v[e], &msg, self.box_width(e)));
                        self.f2v[e] = msg;
                    }
                }
            }
            Schedule::Synchronous => {
                let parallel = self.graph.n_edges() >= 4096;
                let factor_out: Vec<Vec<(usize, BetaMessage)>> = if parallel {
                    (0..self.graph.n_factors())
                        .into_par_iter()
                        .map(|a| self.factor_messages(a))
                        .collect::<Result<_>>()?
                } else {
                    (0..self.graph.n_factors())
                        .map(|a| self.factor_messages(a))
                        .collect::<Result<_>>()?
                };
                for (e, msg) in factor_out.into_iter().flatten() {
                    max_delta = max_delta.max(delta(&self.f2v[e], &msg, self.box_width(e)));
                    self.f2v[e] = msg;
                }
                let var_out: Vec<BetaMessage> = if parallel {
                    (0..self.graph.n_edges())
                        .into_par_iter()
                        .map(|e| self.var_message(e))
                        .collect::<Result<_>>()?
                } else {
                    (0..self.graph.n_edges())
                        .map(|e| self.var_message(e))
                        .collect::<Result<_>>()?
                };
                for (e, msg) in var_out.into_iter().enumerate() {
                    max_delta = max_delta.max(delta(&self.v2f[e], &msg, self.box_width(e)));
                    self.v2f[e] = msg;
                }
            }
        }
        self.iteration += 1;
        self.last_delta = max_delta;
        Ok(max_delta)
    }

    /// Sweeps until the change drops below `tol` or `max_iter` sweeps have run.
    pub fn run(&mut self, max_iter: usize, tol: f64) -> Result<()> {
        self.converged = self.graph.n_edges() == 0;
        if self.converged {
            self.last_delta = 0.0;
            return Ok(());
        }
        for _ in 0..max_iter {
            if self.sweep()? < tol {
                self.converged = true;
                break;
            }
        }
        Ok(())
    }

    /// Runs with the limits from the state's configuration.
    pub fn run_to_convergence(&mut self) -> Result<()> {
        self.run(self.config.max_iter, self.config.tol)
    }

    /// Bethe entropy (log-volume) from the current messages.
    pub fn entropy(&self) -> Result<EntropyReport> {
        entropy::entropy(self, &EntropyOptions::default())
    }

    pub fn entropy_with(&self, options: &EntropyOptions) -> Result<EntropyReport> {
        entropy::entropy(self, options)
    }

    /// `exp(H)`.
    pub fn volume(&self) -> Result<f64> {
        Ok(self.entropy()?.h.exp())
    }

    /// Per-variable beliefs, indexed like the input system.
    pub fn marginals(&self) -> Result<MarginalSet> {
        marginals::marginals(self)
    }

    /// Incoming factor messages of reduced variable `i`.
    pub(crate) fn incoming(&self, i: usize) -> Vec<BetaMessage> {
        self.graph.var_edges(i).iter().map(|&e| self.f2v[e]).collect()
    }

    pub(crate) fn reduced_bounds(&self, i: usize) -> (f64, f64) {
        self.bounds(i)
    }
}

/// Normalized product of `msgs` on `[lo, hi]`, moment-matched to a Beta.
fn combine(msgs: &[BetaMessage], lo: f64, hi: f64) -> Result<BetaMessage> {
    match msgs {
        [] => Ok(BetaMessage::uniform(lo, hi)),
        [only] => Ok(*only),
        _ => {
            let tol = overlap_tol(lo, hi);
            if let Some(p) = msgs.iter().find(|m| m.is_point()) {
                let x = p.mean();
                if msgs.iter().all(|m| x >= m.lower() - tol && x <= m.upper() + tol) {
                    return Ok(BetaMessage::point(x.clamp(lo, hi)));
                }
                return Err(Error::EmptyOverlap { lo, hi });
            }
            let a = msgs.iter().fold(lo, |m, msg| m.max(msg.lower()));
            let b = msgs.iter().fold(hi, |m, msg| m.min(msg.upper()));
            if a > b + tol {
                return Err(Error::EmptyOverlap { lo: a, hi: b });
            }
            if b - a < PIN_WIDTH {
                return Ok(BetaMessage::point(0.5 * (a + b)));
            }
            let pm = product_moments(msgs, lo, hi)?;
            Ok(BetaMessage::fit(pm.mean, pm.variance, pm.lower, pm.upper))
        }
    }
}

/// Outcome of a complete solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub state: BpState,
    pub marginals: MarginalSet,
    pub entropy: EntropyReport,
}

/// Initializes, runs to convergence, and evaluates marginals and entropy.
pub fn solve(sys: &LinearSystem, config: &BpConfig) -> Result<Solution> {
    let mut state = BpState::init(sys, config)?;
    state.run_to_convergence()?;
    finish(state)
}

/// Like [`solve`] but warm-started from a previous state.
pub fn solve_warm(sys: &LinearSystem, config: &BpConfig, previous: &BpState) -> Result<Solution> {
    let mut state = BpState::init_warm(sys, config, previous)?;
    state.run_to_convergence()?;
    finish(state)
}

fn finish(state: BpState) -> Result<Solution> {
    let marginals = state.marginals()?;
    let entropy = state.entropy()?;
    Ok(Solution {
        state,
        marginals,
        entropy,
    })
}
