use std::collections::{HashMap, VecDeque};
use std::io::Read;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{solve, BpConfig};
use crate::error::{Error, Result};
use crate::linalg::rref;
use crate::model::{LinearSystem, Term};
use crate::rng::{stream_rng, Stream};

/// A directed network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<String>,
    /// Directed links `(from, to)`.
    pub links: Vec<(usize, usize)>,
}

/// Eleven backbone routers joined by fifteen bidirectional links (30 directed).
pub fn abilene_like() -> Topology {
    let nodes = [
        "ATLA", "CHIN", "DNVR", "HSTN", "IPLS", "KSCY", "LOSA", "NYCM", "SNVA", "STTL", "WASH",
    ];
    let pairs = [
        ("ATLA", "HSTN"),
        ("ATLA", "IPLS"),
        ("ATLA", "WASH"),
        ("CHIN", "IPLS"),
        ("CHIN", "NYCM"),
        ("DNVR", "IPLS"),
        ("DNVR", "KSCY"),
        ("DNVR", "SNVA"),
        ("DNVR", "STTL"),
        ("HSTN", "KSCY"),
        ("HSTN", "LOSA"),
        ("IPLS", "KSCY"),
        ("LOSA", "SNVA"),
        ("NYCM", "WASH"),
        ("SNVA", "STTL"),
    ];
    let id = |n: &str| nodes.iter().position(|&m| m == n).unwrap();
    let mut links = Vec::with_capacity(2 * pairs.len());
    for (u, v) in pairs {
        links.push((id(u), id(v)));
        links.push((id(v), id(u)));
    }
    Topology {
        nodes: nodes.iter().map(|s| s.to_string()).collect(),
        links,
    }
}

impl Topology {
    pub fn link_name(&self, l: usize) -> String {
        let (u, v) = self.links[l];
        format!("{}-{}", self.nodes[u], self.nodes[v])
    }

    /// Hop-count shortest paths for every ordered pair of distinct nodes.
    ///
    /// BFS visits neighbours in link order, so ties resolve the same way every run.
    pub fn routing(&self) -> Result<Routing> {
        let n = self.nodes.len();
        let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (l, &(u, v)) in self.links.iter().enumerate() {
            out[u].push((v, l));
        }
        let mut pair_names = Vec::new();
        let mut paths = Vec::new();
        for o in 0..n {
            let mut via: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut seen = vec![false; n];
            seen[o] = true;
            let mut queue = VecDeque::from([o]);
            while let Some(u) = queue.pop_front() {
                for &(v, l) in &out[u] {
                    if !seen[v] {
                        seen[v] = true;
                        via[v] = Some((u, l));
                        queue.push_back(v);
                    }
                }
            }
            for d in (0..n).filter(|&d| d != o) {
                if !seen[d] {
                    return Err(Error::Parameter(format!(
                        "{} is unreachable from {}",
                        self.nodes[d], self.nodes[o]
                    )));
                }
                let mut path = Vec::new();
                let mut at = d;
                while let Some((prev, l)) = via[at] {
                    path.push(l);
                    at = prev;
                }
                path.reverse();
                pair_names.push(format!("{}-{}", self.nodes[o], self.nodes[d]));
                paths.push(path);
            }
        }
        let link_names = (0..self.links.len()).map(|l| self.link_name(l)).collect();
        Routing::new(pair_names, link_names, paths)
    }
}

/// 0/1 routing matrix stored as the link list of each origin-destination pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Routing {
    pub pair_names: Vec<String>,
    pub link_names: Vec<String>,
    pub paths: Vec<Vec<usize>>,
}

impl Routing {
    pub fn new(pair_names: Vec<String>, link_names: Vec<String>, paths: Vec<Vec<usize>>) -> Result<Self> {
        if pair_names.len() != paths.len() {
            return Err(Error::Parameter(format!(
                "{} pair names for {} paths",
                pair_names.len(),
                paths.len()
            )));
        }
        for (p, path) in paths.iter().enumerate() {
            if path.is_empty() {
                return Err(Error::Parameter(format!("pair {} has an empty path", pair_names[p])));
            }
            if let Some(&l) = path.iter().find(|&&l| l >= link_names.len()) {
                return Err(Error::Parameter(format!(
                    "pair {} uses unknown link {l}",
                    pair_names[p]
                )));
            }
            let mut sorted = path.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != path.len() {
                return Err(Error::Parameter(format!("pair {} repeats a link", pair_names[p])));
            }
        }
        Ok(Self {
            pair_names,
            link_names,
            paths,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.paths.len()
    }

    pub fn n_links(&self) -> usize {
        self.link_names.len()
    }

    /// Keeps the listed pairs and every link.
    pub fn restrict_pairs(&self, keep: &[usize]) -> Result<Self> {
        Routing::new(
            keep.iter().map(|&p| self.pair_names[p].clone()).collect(),
            self.link_names.clone(),
            keep.iter().map(|&p| self.paths[p].clone()).collect(),
        )
    }

    /// Link loads `y = S x`.
    pub fn loads(&self, flows: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_links()];
        for (path, &x) in self.paths.iter().zip(flows) {
            for &l in path {
                y[l] += x;
            }
        }
        y
    }

    /// Number of paths crossing each link.
    pub fn link_sharing(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_links()];
        for path in &self.paths {
            for &l in path {
                c[l] += 1;
            }
        }
        c
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut s = vec![vec![0.0; self.n_pairs()]; self.n_links()];
        for (p, path) in self.paths.iter().enumerate() {
            for &l in path {
                s[l][p] = 1.0;
            }
        }
        s
    }

    /// The window system `S x = y`, `lower <= x <= upper`.
    pub fn system(&self, loads: &[f64], lower: Vec<f64>, upper: Vec<f64>) -> Result<LinearSystem> {
        let mut terms = Vec::new();
        for (p, path) in self.paths.iter().enumerate() {
            for &l in path {
                terms.push(Term {
                    eq: l,
                    var: p,
                    coeff: 1.0,
                });
            }
        }
        LinearSystem::new(self.n_pairs(), terms, loads.to_vec(), lower, upper)?
            .with_var_names(self.pair_names.clone())?
            .with_eq_names(self.link_names.clone())
    }
}

/// Link loads per window, optionally with the true pair flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSeries {
    pub times: Vec<String>,
    /// `loads[t][link]`.
    pub loads: Vec<Vec<f64>>,
    /// `truth[t][pair]`.
    pub truth: Option<Vec<Vec<f64>>>,
}

impl TrafficSeries {
    pub fn n_windows(&self) -> usize {
        self.loads.len()
    }

    /// Averages consecutive groups of `k` windows; a short final group is averaged as is.
    pub fn aggregate(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("aggregation width must be positive".into()));
        }
        let mean = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.chunks(k)
                .map(|c| {
                    let mut m = vec![0.0; c[0].len()];
                    for r in c {
                        for (a, b) in m.iter_mut().zip(r) {
                            *a += b;
                        }
                    }
                    m.iter().map(|v| v / c.len() as f64).collect()
                })
                .collect()
        };
        Ok(Self {
            times: self.times.chunks(k).map(|c| c[0].clone()).collect(),
            loads: mean(&self.loads),
            truth: self.truth.as_deref().map(mean),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub windows: usize,
    /// Mean total traffic per window.
    pub total: f64,
    /// Log-scale spread of the node masses.
    pub mass_sigma: f64,
    /// Log-scale noise on each flow.
    pub noise_sigma: f64,
    /// Relative amplitude of the daily cycle.
    pub diurnal: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            windows: 24,
            total: 100.0,
            mass_sigma: 0.5,
            noise_sigma: 0.3,
            diurnal: 0.5,
            seed: 0,
        }
    }
}

/// Gravity-model flows with a daily cycle and lognormal noise; loads are exact.
///
/// Pair names must read `origin-destination`.
pub fn synthetic_traffic(routing: &Routing, cfg: &SyntheticConfig) -> Result<TrafficSeries> {
    if cfg.windows == 0 || !(cfg.total > 0.0) || cfg.mass_sigma < 0.0 || cfg.noise_sigma < 0.0 {
        return Err(Error::Parameter(format!("bad synthetic traffic parameters {cfg:?}")));
    }
    let mut rng = stream_rng(cfg.seed, Stream::Synthetic);
    let mut node_ids: HashMap<&str, usize> = HashMap::new();
    let mut ends = Vec::with_capacity(routing.n_pairs());
    for name in &routing.pair_names {
        let (o, d) = name
            .split_once('-')
            .ok_or_else(|| Error::Parameter(format!("pair name {name} is not origin-destination")))?;
        let n = node_ids.len();
        let o = *node_ids.entry(o).or_insert(n);
        let n = node_ids.len();
        let d = *node_ids.entry(d).or_insert(n);
        ends.push((o, d));
    }
    let mass_dist = LogNormal::new(0.0, cfg.mass_sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let noise =
        LogNormal::new(-0.5 * cfg.noise_sigma.powi(2), cfg.noise_sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let mass: Vec<f64> = (0..node_ids.len()).map(|_| mass_dist.sample(&mut rng)).collect();
    let phase: Vec<f64> = (0..node_ids.len())
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let norm: f64 = ends.iter().map(|&(o, d)| mass[o] * mass[d]).sum();
    let mut truth = Vec::with_capacity(cfg.windows);
    for t in 0..cfg.windows {
        let angle = std::f64::consts::TAU * t as f64 / 24.0;
        let row: Vec<f64> = ends
            .iter()
            .map(|&(o, d)| {
                let cycle = 1.0 + cfg.diurnal * (angle + phase[o]).sin();
                cfg.total * mass[o] * mass[d] / norm * cycle.max(0.05) * noise.sample(&mut rng)
            })
            .collect();
        truth.push(row);
    }
    Ok(TrafficSeries {
        times: (0..cfg.windows).map(|t| t.to_string()).collect(),
        loads: truth.iter().map(|x| routing.loads(x)).collect(),
        truth: Some(truth),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpperBoundRule {
    /// One bound for every pair: the largest flow seen in the experiment.
    #[default]
    GlobalMax,
    /// Each pair's own largest flow over time.
    PerPairMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    pub rule: UpperBoundRule,
    pub bp: BpConfig,
    /// Single-link pairs on a link crossed by at least this many paths are flagged.
    pub flag_sharing: usize,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            rule: UpperBoundRule::GlobalMax,
            bp: BpConfig::default(),
            flag_sharing: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub window: usize,
    pub time: String,
    pub estimate: Option<Vec<f64>>,
    /// Pairs fixed by the loads alone.
    pub n_determined: usize,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyMetrics {
    pub windows_used: usize,
    /// Per pair, `sum_t |e - x| / sum_t x`; `None` for pairs with no traffic.
    pub per_pair_relative_error: Vec<Option<f64>>,
    /// Mean of the per-pair errors.
    pub mean_relative_error: f64,
    /// Mean of `|e - x| / x` over every positive (pair, window).
    pub pointwise_relative_error: f64,
    pub rmse: f64,
    /// RMSE divided by the largest true flow.
    pub rmse_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedPair {
    pub pair: usize,
    pub name: String,
    pub link: String,
    pub sharing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyReport {
    pub config: TomographyConfig,
    pub upper_bounds: Vec<f64>,
    pub windows: Vec<WindowResult>,
    pub metrics: Option<TomographyMetrics>,
    /// Pairs whose only link carries many other paths.
    pub flagged: Vec<FlaggedPair>,
}

fn upper_bounds(routing: &Routing, series: &TrafficSeries, rule: UpperBoundRule) -> Vec<f64> {
    let np = routing.n_pairs();
    match (&series.truth, rule) {
        (Some(truth), UpperBoundRule::GlobalMax) => {
            let m = truth.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
            vec![m; np]
        }
        (Some(truth), UpperBoundRule::PerPairMax) => (0..np)
            .map(|p| truth.iter().map(|r| r[p]).fold(0.0f64, f64::max))
            .collect(),
        (None, UpperBoundRule::GlobalMax) => {
            let m = series.loads.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
            vec![m; np]
        }
        (None, UpperBoundRule::PerPairMax) => (0..np)
            .map(|p| {
                series
                    .loads
                    .iter()
                    .map(|y| routing.paths[p].iter().map(|&l| y[l]).fold(f64::INFINITY, f64::min))
                    .fold(0.0f64, f64::max)
            })
            .collect(),
    }
}

fn infer_window(
    routing: &Routing,
    dense: &[Vec<f64>],
    loads: &[f64],
    ub: &[f64],
    bp: &BpConfig,
) -> Result<(Vec<f64>, usize, bool, usize)> {
    if loads.iter().any(|&y| y < 0.0 || !y.is_finite()) {
        return Err(Error::Parameter("link loads must be finite and non-negative".into()));
    }
    let scale = loads.iter().fold(1.0f64, |a, &b| a.max(b));
    let r = rref(dense, loads, 1e-10);
    if r.inconsistency > 1e-9 * scale {
        return Err(Error::Infeasible(format!(
            "loads inconsistent with routing (residual {:.3e})",
            r.inconsistency
        )));
    }
    let free = r.free_columns();
    let mut lower = vec![0.0; routing.n_pairs()];
    let mut upper = ub.to_vec();
    let mut n_determined = 0;
    for (k, &c) in r.pivots.iter().enumerate() {
        if free.iter().all(|&f| r.rows[k][f].abs() <= 1e-12) {
            let v = r.rhs[k].max(0.0);
            lower[c] = v;
            upper[c] = v;
            n_determined += 1;
        }
    }
    let sys = routing.system(loads, lower, upper)?;
    let sol = solve(&sys, bp)?;
    Ok((
        sol.marginals.means(),
        n_determined,
        sol.entropy.converged,
        sol.entropy.iterations,
    ))
}

fn metrics(routing: &Routing, windows: &[WindowResult], truth: &[Vec<f64>]) -> TomographyMetrics {
    let np = routing.n_pairs();
    let mut abs_err = vec![0.0; np];
    let mut mass = vec![0.0; np];
    let (mut pointwise, mut n_point, mut sq, mut n_sq) = (0.0, 0usize, 0.0, 0usize);
    let mut used = 0;
    for w in windows {
        let Some(est) = &w.estimate else { continue };
        used += 1;
        for p in 0..np {
            let (e, x) = (est[p], truth[w.window][p]);
            abs_err[p] += (e - x).abs();
            mass[p] += x;
            if x > 0.0 {
                pointwise += (e - x).abs() / x;
                n_point += 1;
            }
            sq += (e - x).powi(2);
            n_sq += 1;
        }
    }
    let per_pair: Vec<Option<f64>> = (0..np).map(|p| (mass[p] > 0.0).then(|| abs_err[p] / mass[p])).collect();
    let valid: Vec<f64> = per_pair.iter().flatten().copied().collect();
    let max_flow = truth.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let rmse = if n_sq > 0 { (sq / n_sq as f64).sqrt() } else { f64::NAN };
    TomographyMetrics {
        windows_used: used,
        mean_relative_error: valid.iter().sum::<f64>() / valid.len() as f64,
        per_pair_relative_error: per_pair,
        pointwise_relative_error: pointwise / n_point as f64,
        rmse,
        rmse_normalized: rmse / max_flow,
    }
}

/// Estimates pair flows per window as BP belief means.
pub fn tomography_infer(routing: &Routing, series: &TrafficSeries, cfg: &TomographyConfig) -> Result<TomographyReport> {
    if series.loads.iter().any(|y| y.len() != routing.n_links()) {
        return Err(Error::Parameter(format!(
            "every window needs {} link loads",
            routing.n_links()
        )));
    }
    if let Some(truth) = &series.truth {
        if truth.len() != series.n_windows() || truth.iter().any(|x| x.len() != routing.n_pairs()) {
            return Err(Error::Parameter(
                "ground truth does not match the windows and pairs".into(),
            ));
        }
    }
    let ub = upper_bounds(routing, series, cfg.rule);
    let dense = routing.dense();
    let windows: Vec<WindowResult> = series
        .loads
        .par_iter()
        .enumerate()
        .map(|(t, loads)| {
            let mut w = WindowResult {
                window: t,
                time: series.times.get(t).cloned().unwrap_or_else(|| t.to_string()),
                estimate: None,
                n_determined: 0,
                converged: false,
                iterations: 0,
                error: None,
            };
            match infer_window(routing, &dense, loads, &ub, &cfg.bp) {
                Ok((est, nd, conv, it)) => {
                    w.estimate = Some(est);
                    w.n_determined = nd;
                    w.converged = conv;
                    w.iterations = it;
                }
                Err(e) => w.error = Some(e.to_string()),
            }
            w
        })
        .collect();
    let sharing = routing.link_sharing();
    let flagged = routing
        .paths
        .iter()
        .enumerate()
        .filter(|(_, path)| path.len() == 1 && sharing[path[0]] >= cfg.flag_sharing)
        .map(|(p, path)| FlaggedPair {
            pair: p,
            name: routing.pair_names[p].clone(),
            link: routing.link_names[path[0]].clone(),
            sharing: sharing[path[0]],
        })
        .collect();
    Ok(TomographyReport {
        config: *cfg,
        metrics: series.truth.as_ref().map(|t| metrics(routing, &windows, t)),
        upper_bounds: ub,
        windows,
        flagged,
    })
}

fn index_of(map: &mut HashMap<String, usize>, order: &mut Vec<String>, key: &str) -> usize {
    if let Some(&i) = map.get(key) {
        return i;
    }
    map.insert(key.to_string(), order.len());
    order.push(key.to_string());
    order.len() - 1
}

/// Reads `pair,link` membership rows. Pairs and links are numbered by first appearance.
pub fn read_routing_csv<R: Read>(reader: R) -> Result<Routing> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let (mut pairs, mut links) = (HashMap::new(), HashMap::new());
    let (mut pair_names, mut link_names) = (Vec::new(), Vec::new());
    let mut paths: Vec<Vec<usize>> = Vec::new();
    for rec in rdr.deserialize() {
        let (pair, link): (String, String) = rec?;
        let p = index_of(&mut pairs, &mut pair_names, &pair);
        let l = index_of(&mut links, &mut link_names, &link);
        if p == paths.len() {
            paths.push(Vec::new());
        }
        paths[p].push(l);
    }
    Routing::new(pair_names, link_names, paths)
}

fn parse_error(line: usize, field: &str, message: String) -> Error {
    Error::Parse {
        line,
        field: field.to_string(),
        message,
    }
}

fn read_series<R: Read>(reader: R, names: &[String], what: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let lookup: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut times: HashMap<String, usize> = HashMap::new();
    let mut order = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    for (n, rec) in rdr.deserialize().enumerate() {
        let line = n + 2;
        let (time, key, value): (String, String, f64) = rec?;
        let &k = lookup
            .get(key.as_str())
            .ok_or_else(|| parse_error(line, what, format!("unknown {what} {key}")))?;
        let t = index_of(&mut times, &mut order, &time);
        if t == rows.len() {
            rows.push(vec![None; names.len()]);
        }
        if rows[t][k].replace(value).is_some() {
            return Err(parse_error(
                line,
                what,
                format!("duplicate {what} {key} at time {time}"),
            ));
        }
    }
    let rows = rows
        .into_iter()
        .zip(&order)
        .map(|(r, time)| {
            r.into_iter()
                .enumerate()
                .map(|(k, v)| {
                    v.ok_or_else(|| parse_error(0, what, format!("missing {what} {} at time {time}", names[k])))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((order, rows))
}

/// Reads `time,link,load` rows and, optionally, `time,pair,flow` ground truth.
pub fn read_traffic_csv<R: Read>(routing: &Routing, loads: R, truth: Option<R>) -> Result<TrafficSeries> {
    let (times, loads) = read_series(loads, &routing.link_names, "link")?;
    let truth = match truth {
        Some(r) => {
            let (t_times, rows) = read_series(r, &routing.pair_names, "pair")?;
            if t_times != times {
                return Err(parse_error(
                    0,
                    "time",
                    "ground-truth times differ from link-load times".into(),
                ));
            }
            Some(rows)
        }
        None => None,
    };
    Ok(TrafficSeries { times, loads, truth })
}

/// Writes `time,pair,flow` rows for every window with an estimate.
pub fn write_estimates_csv<W: std::io::Write>(routing: &Routing, report: &TomographyReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "pair", "flow"])?;
    for win in &report.windows {
        if let Some(est) = &win.estimate {
            for (p, e) in est.iter().enumerate() {
                w.write_record([win.time.as_str(), routing.pair_names[p].as_str(), &e.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(routing: &Routing, truth: Vec<Vec<f64>>) -> TrafficSeries {
        TrafficSeries {
            times: (0..truth.len()).map(|t| t.to_string()).collect(),
            loads: truth.iter().map(|x| routing.loads(x)).collect(),
            truth: Some(truth),
        }
    }

    #[test]
    fn abilene_shape() {
        let top = abilene_like();
        assert_eq!(top.nodes.len(), 11);
        assert_eq!(top.links.len(), 30);
        let r = top.routing().unwrap();
        assert_eq!(r.n_pairs(), 110);
        // Every path is a walk from its origin to its destination.
        for (p, path) in r.paths.iter().enumerate() {
            let (o, d) = r.pair_names[p].split_once('-').unwrap();
            assert_eq!(top.nodes[top.links[path[0]].0], o);
            assert_eq!(top.nodes[top.links[*path.last().unwrap()].1], d);
            for w in path.windows(2) {
                assert_eq!(top.links[w[0]].1, top.links[w[1]].0);
            }
        }
        let dnvr_ipls = r.pair_names.iter().position(|n| n == "DNVR-IPLS").unwrap();
        assert_eq!(r.paths[dnvr_ipls].len(), 1);
        assert_eq!(top.routing().unwrap(), r);
    }

    #[test]
    fn single_pair_on_own_link() {
        let r = Routing::new(vec!["a-b".into()], vec!["ab".into()], vec![vec![0]]).unwrap();
        let rep = tomography_infer(
            &r,
            &series(&r, vec![vec![3.5], vec![1.25]]),
            &TomographyConfig::default(),
        )
        .unwrap();
        for (w, x) in rep.windows.iter().zip([3.5, 1.25]) {
            assert_eq!(w.estimate.as_ref().unwrap()[0], x);
        }
        assert_eq!(rep.metrics.unwrap().mean_relative_error, 0.0);
    }

    #[test]
    fn square_invertible_routing() {
        // Each link is shared by two of three pairs around a cycle.
        let r = Routing::new(
            vec!["p0".into(), "p1".into(), "p2".into()],
            vec!["l0".into(), "l1".into(), "l2".into()],
            vec![vec![0, 2], vec![0, 1], vec![1, 2]],
        )
        .unwrap();
        let truth = vec![vec![0.3, 1.7, 0.9], vec![2.0, 0.1, 0.5]];
        let rep = tomography_infer(&r, &series(&r, truth.clone()), &TomographyConfig::default()).unwrap();
        for (w, x) in rep.windows.iter().zip(&truth) {
            assert_eq!(w.n_determined, 3);
            for (e, t) in w.estimate.as_ref().unwrap().iter().zip(x) {
                assert!((e - t).abs() < 1e-9, "{e} vs {t}");
            }
        }
    }

    #[test]
    fn inconsistent_window_is_skipped() {
        let r = Routing::new(
            vec!["p".into(), "q".into()],
            vec!["l0".into(), "l1".into()],
            vec![vec![0, 1], vec![0, 1]],
        )
        .unwrap();
        let s = TrafficSeries {
            times: vec!["0".into(), "1".into()],
            loads: vec![vec![1.0, 1.0], vec![1.0, 2.0]],
            truth: None,
        };
        let rep = tomography_infer(&r, &s, &TomographyConfig::default()).unwrap();
        assert!(rep.windows[0].estimate.is_some());
        assert!(rep.windows[1].estimate.is_none());
        assert!(rep.windows[1].error.as_ref().unwrap().contains("inconsistent"));
    }

    #[test]
    fn symmetric_pair_split_evenly() {
        // x + y = 1 with equal bounds: the belief means are 1/2 each.
        let r = Routing::new(vec!["p".into(), "q".into()], vec!["l".into()], vec![vec![0], vec![0]]).unwrap();
        let rep = tomography_infer(&r, &series(&r, vec![vec![0.2, 0.8]]), &TomographyConfig::default()).unwrap();
        let e = rep.windows[0].estimate.as_ref().unwrap();
        assert!((e[0] - 0.5).abs() < 1e-9 && (e[1] - 0.5).abs() < 1e-9);
        let m = rep.metrics.unwrap();
        // |0.5-0.2|/0.2 = 1.5 and |0.5-0.8|/0.8 = 0.375.
        assert!((m.mean_relative_error - (1.5 + 0.375) / 2.0).abs() < 1e-9);
        assert!((m.rmse - 0.3).abs() < 1e-9);
        assert!((m.rmse_normalized - 0.3 / 0.8).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip_and_aggregation() {
        let routing = read_routing_csv("pair,link\np,l0\np,l1\nq,l1\n".as_bytes()).unwrap();
        assert_eq!(routing.paths, vec![vec![0, 1], vec![1]]);
        let loads = "time,link,load\n0,l0,1\n0,l1,3\n1,l1,5\n1,l0,2\n";
        let truth = "time,pair,flow\n0,p,1\n0,q,2\n1,p,2\n1,q,3\n";
        let s = read_traffic_csv(&routing, loads.as_bytes(), Some(truth.as_bytes())).unwrap();
        assert_eq!(s.loads, vec![vec![1.0, 3.0], vec![2.0, 5.0]]);
        let a = s.aggregate(2).unwrap();
        assert_eq!(a.loads, vec![vec![1.5, 4.0]]);
        assert_eq!(a.truth.unwrap(), vec![vec![1.5, 2.5]]);
        assert!(read_traffic_csv(&routing, "time,link,load\n0,l0,1\n".as_bytes(), None).is_err());
        assert!(read_traffic_csv(&routing, "time,link,load\n0,zz,1\n".as_bytes(), None).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_consistent() {
        let r = abilene_like().routing().unwrap();
        let cfg = SyntheticConfig {
            windows: 3,
            ..SyntheticConfig::default()
        };
        let a = synthetic_traffic(&r, &cfg).unwrap();
        assert_eq!(a, synthetic_traffic(&r, &cfg).unwrap());
        let truth = a.truth.as_ref().unwrap();
        assert!(truth.iter().flatten().all(|&x| x > 0.0));
        assert_eq!(a.loads[1], r.loads(&truth[1]));
    }
}
