use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use bpbeta::ensembles::tomography::{Routing, TrafficSeries};
use bpbeta::ensembles::{
    abilene_like, benchmark_volumes, compare_marginals, convergence_scan, generate, knockdown_scan, rbc_network,
    read_routing_csv, read_traffic_csv, synthetic_traffic, tomography_infer, BenchmarkConfig, EnsembleSpec,
    KnockdownConfig, KnockdownRule, SyntheticConfig, TomographyConfig, UpperBoundRule,
};
use bpbeta::model::io::{load_system, write_json, Format};
use bpbeta::oracle::{
    chart, default_steps, exact_log_volume, histogram, sample_with_burn_in, uniform_edges, DEFAULT_MAX_DIM,
};
use bpbeta::{solve, BpConfig, LinearSystem, Schedule};

use crate::output::{read_input, Echo, OutDir};
use crate::{
    BenchmarkArgs, BoundRuleArg, Command, Common, ConvergeArgs, EnsembleArg, EnsembleInput, FormatArg, GenArgs,
    KnockRuleArg, KnockdownArgs, SampleArgs, ScheduleArg, SolveArgs, SystemInput, TomographyArgs, EXIT_NOT_CONVERGED,
};

pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Knockdown(a) => cmd_knockdown(a),
        Command::Tomography(a) => cmd_tomography(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

/// Wall-clock phases, written only on request.
struct Timer {
    start: Instant,
    phases: Vec<(String, f64)>,
}

impl Timer {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            phases: Vec::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let done: f64 = self.phases.iter().map(|p| p.1).sum();
        self.phases
            .push((name.to_string(), self.start.elapsed().as_secs_f64() - done));
    }

    fn write(&self, common: &Common, out: &mut OutDir, echo: &Echo) -> Result<()> {
        if !common.timings {
            return Ok(());
        }
        let phases: serde_json::Map<String, Value> = self.phases.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        out.write_json("timings.json", echo, &json!({ "seconds": phases }))
    }
}

fn echo(command: &str, common: &Common, settings: Value) -> Result<Echo> {
    if !(common.tol > 0.0) {
        bail!("--tol must be positive");
    }
    let mut e = Echo {
        command: command.into(),
        seed: common.seed,
        tol: common.tol,
        damping: common.damping,
        max_iter: common.max_iter,
        inputs: Vec::new(),
        input_hash: String::new(),
        settings,
    };
    e.finish_inputs();
    Ok(e)
}

fn bp_config(common: &Common, exact_default: bool) -> Result<BpConfig> {
    let cfg = BpConfig {
        damping: common.damping,
        max_iter: common.max_iter,
        tol: common.tol,
        schedule: match common.schedule {
            ScheduleArg::Sequential => Schedule::Sequential,
            ScheduleArg::Synchronous => Schedule::Synchronous,
        },
        seed: common.seed,
        exact_bounds: common.exact_bounds.map_or(exact_default, |v| v.is_on()),
        ..BpConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load(
    input: &Path,
    format: FormatArg,
    bounds: Option<&Path>,
    rhs: Option<&Path>,
    echo: &mut Echo,
) -> Result<LinearSystem> {
    let main = read_input(input, echo)?;
    let bounds = bounds.map(|p| read_input(p, echo)).transpose()?;
    let rhs = rhs.map(|p| read_input(p, echo)).transpose()?;
    let format = match format {
        FormatArg::Json => Format::Json,
        FormatArg::TripletCsv => Format::TripletCsv,
        FormatArg::DenseCsv => Format::DenseCsv,
    };
    let sys = load_system(format, main.as_slice(), bounds.as_deref(), rhs.as_deref())
        .with_context(|| format!("loading {}", input.display()))?;
    Ok(sys)
}

fn load_input(s: &SystemInput, echo: &mut Echo) -> Result<LinearSystem> {
    load(&s.input, s.format, s.bounds.as_deref(), s.rhs.as_deref(), echo)
}

fn spec_of(e: &EnsembleInput, seed: u64) -> EnsembleSpec {
    let spec = match e.ensemble {
        EnsembleArg::Er => EnsembleSpec::er(e.n, e.m, e.k, seed),
        EnsembleArg::SmallWorld => EnsembleSpec::small_world(e.n, e.m, e.extra_links, seed),
        EnsembleArg::ScaleFree => EnsembleSpec::scale_free(e.n, e.m, seed),
    };
    EnsembleSpec {
        lower: e.lower,
        upper: e.upper,
        ..spec
    }
}

fn csv_rows<S: Serialize>(buf: &mut Vec<u8>, header: &[&str], rows: impl IntoIterator<Item = S>) -> Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn done(out: &OutDir, converged: bool) -> u8 {
    for p in out.written() {
        eprintln!("wrote {}", p.display());
    }
    if converged {
        0
    } else {
        eprintln!("warning: message passing did not converge");
        EXIT_NOT_CONVERGED
    }
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let mut timer = Timer::new();
    let settings = json!({ "format": format!("{:?}", a.system.format), "oracle": a.oracle.is_on(),
        "mc_steps": a.mc_steps, "bins": a.bins, "schedule": format!("{:?}", a.common.schedule),
        "exact_bounds": a.common.exact_bounds.is_some_and(|v| v.is_on()) });
    let mut echo = echo("solve", &a.common, settings)?;
    let sys = load_input(&a.system, &mut echo)?;
    let cfg = bp_config(&a.common, false)?;
    let mut out = OutDir::create(&a.common.out)?;
    timer.lap("load");
    let sol = solve(&sys, &cfg)?;
    timer.lap("bp");

    let mut report = serde_json::to_value(&sol.entropy)?;
    let obj = report.as_object_mut().expect("entropy report is an object");
    obj.remove("h");
    obj.insert("H".into(), json!(sol.entropy.h));
    obj.insert("V".into(), json!(sol.entropy.volume()));
    obj.insert("n_vars".into(), json!(sys.n_vars()));
    obj.insert("n_eqs".into(), json!(sys.n_eqs()));
    if a.oracle.is_on() {
        let exact = match exact_log_volume(&sys, DEFAULT_MAX_DIM) {
            Ok(lv) => json!({ "log_volume": lv, "volume": lv.exp() }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        obj.insert("oracle".into(), exact);
        timer.lap("oracle");
    }
    if let Some(steps) = a.mc_steps {
        let cmp = compare_marginals(&sys, &sol, steps, 1, a.bins, a.common.seed)?;
        obj.insert(
            "mcmc".into(),
            json!({ "steps": steps, "bins": a.bins, "mean_l1": cmp.mean, "per_var_l1": cmp.per_var }),
        );
        timer.lap("mcmc");
    }
    out.write_csv("marginals.csv", &echo, |buf| Ok(sol.marginals.write_csv(buf)?))?;
    out.write_json("entropy.json", &echo, &report)?;
    timer.write(&a.common, &mut out, &echo)?;
    Ok(done(&out, sol.entropy.converged))
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<u8> {
    let mut timer = Timer::new();
    let spec = spec_of(&a.ensemble, a.common.seed);
    let cfg = BenchmarkConfig {
        spec,
        instances: a.instances,
        bp: bp_config(&a.common, false)?,
        oracle: a.oracle.is_on(),
        max_dim: DEFAULT_MAX_DIM,
        mcmc_steps: a.mc_steps,
        bins: a.bins,
    };
    let echo = echo("benchmark", &a.common, serde_json::to_value(cfg)?)?;
    let mut out = OutDir::create(&a.common.out)?;
    let report = benchmark_volumes(&cfg);
    timer.lap("benchmark");
    out.write_csv("benchmark.csv", &echo, |buf| {
        csv_rows(
            buf,
            &[
                "index",
                "seed",
                "n_edges",
                "bp_log_volume",
                "bp_volume",
                "exact_volume",
                "converged",
                "iterations",
                "mcmc_l1",
                "excluded",
            ],
            report.instances.iter().map(|r| {
                (
                    r.index,
                    r.seed,
                    r.n_edges,
                    r.bp_log_volume,
                    r.bp_volume,
                    r.exact_volume,
                    r.bp_converged,
                    r.bp_iterations,
                    r.mcmc_l1,
                    r.excluded.clone().unwrap_or_default(),
                )
            }),
        )
    })?;
    out.write_json("benchmark.json", &echo, &report)?;
    timer.write(&a.common, &mut out, &echo)?;
    if let Some(eps) = report.epsilon {
        eprintln!("epsilon = {eps:.4} over {} instances", report.n_used);
    }
    Ok(done(&out, true))
}

fn cmd_converge(a: ConvergeArgs) -> Result<u8> {
    let mut timer = Timer::new();
    let bp = bp_config(&a.common, false)?;
    let echo = echo(
        "converge",
        &a.common,
        json!({ "n": a.n, "m": a.m, "ks": a.ks, "trials": a.trials, "bp": bp }),
    )?;
    let mut out = OutDir::create(&a.common.out)?;
    let points = convergence_scan(a.n, a.m, &a.ks, a.trials, &bp, a.common.seed);
    timer.lap("scan");
    out.write_csv("converge.csv", &echo, |buf| {
        csv_rows(
            buf,
            &[
                "n",
                "m",
                "mean_degree",
                "trials",
                "converged",
                "probability",
                "mean_iterations",
            ],
            points.iter().map(|p| {
                (
                    a.n,
                    a.m,
                    p.mean_degree,
                    p.trials,
                    p.converged,
                    p.probability,
                    p.mean_iterations,
                )
            }),
        )
    })?;
    out.write_json("converge.json", &echo, &json!({ "points": points }))?;
    timer.write(&a.common, &mut out, &echo)?;
    Ok(done(&out, true))
}

fn cmd_knockdown(a: KnockdownArgs) -> Result<u8> {
    let mut timer = Timer::new();
    let rule = match a.rule {
        KnockRuleArg::Symmetric => KnockdownRule::Symmetric,
        KnockRuleArg::UpperOnly => KnockdownRule::UpperOnly,
    };
    let cfg = KnockdownConfig {
        factor: a.factor,
        rule,
        warm_start: a.warm_start,
        bp: bp_config(&a.common, true)?,
    };
    let mut echo = echo("knockdown", &a.common, serde_json::to_value(cfg)?)?;
    let sys = match &a.input {
        Some(p) => load(p, a.format, a.bounds.as_deref(), a.rhs.as_deref(), &mut echo)?,
        None => rbc_network()?,
    };
    let mut out = OutDir::create(&a.common.out)?;
    timer.lap("load");
    let report = knockdown_scan(&sys, &cfg)?;
    timer.lap("scan");
    let mut rank = vec![None; report.entries.len()];
    for (r, &v) in report.ranking.iter().enumerate() {
        rank[v] = Some(r + 1);
    }
    out.write_csv("knockdown.csv", &echo, |buf| {
        csv_rows(
            buf,
            &[
                "var",
                "name",
                "rank",
                "delta_h",
                "log_volume",
                "converged",
                "iterations",
                "error",
            ],
            report.entries.iter().map(|e| {
                (
                    e.var,
                    &e.name,
                    rank[e.var],
                    e.delta_h,
                    e.log_volume,
                    e.converged,
                    e.iterations,
                    e.error.clone().unwrap_or_default(),
                )
            }),
        )
    })?;
    out.write_json("knockdown.json", &echo, &report)?;
    timer.write(&a.common, &mut out, &echo)?;
    Ok(done(&out, report.entries.iter().all(|e| e.converged)))
}

fn cmd_tomography(a: TomographyArgs) -> Result<u8> {
    let mut timer = Timer::new();
    let cfg = TomographyConfig {
        rule: match a.rule {
            BoundRuleArg::GlobalMax => UpperBoundRule::GlobalMax,
            BoundRuleArg::PerPairMax => UpperBoundRule::PerPairMax,
        },
        bp: bp_config(&a.common, false)?,
        ..TomographyConfig::default()
    };
    let mut echo = echo(
        "tomography",
        &a.common,
        json!({ "config": cfg, "windows": a.windows, "synthetic": a.loads.is_none() }),
    )?;
    let (routing, series): (Routing, TrafficSeries) = match &a.loads {
        Some(loads) => {
            let routing = match &a.routing {
                Some(p) => read_routing_csv(read_input(p, &mut echo)?.as_slice())?,
                None => abilene_like().routing()?,
            };
            let loads = read_input(loads, &mut echo)?;
            let truth = a.truth.as_deref().map(|p| read_input(p, &mut echo)).transpose()?;
            let series = read_traffic_csv(&routing, loads.as_slice(), truth.as_deref())?;
            (routing, series)
        }
        None => {
            if a.truth.is_some() {
                bail!("--truth needs --loads");
            }
            let routing = abilene_like().routing()?;
            let syn = SyntheticConfig {
                windows: a.windows,
                seed: a.common.seed,
                ..SyntheticConfig::default()
            };
            let series = synthetic_traffic(&routing, &syn)?;
            (routing, series)
        }
    };
    let mut out = OutDir::create(&a.common.out)?;
    timer.lap("load");
    let report = tomography_infer(&routing, &series, &cfg)?;
    timer.lap("infer");
    out.write_csv("estimates.csv", &echo, |buf| {
        let mut rows = Vec::new();
        for w in &report.windows {
            let Some(est) = &w.estimate else { continue };
            for (p, e) in est.iter().enumerate() {
                let truth = series.truth.as_ref().map(|t| t[w.window][p]);
                rows.push((w.time.clone(), routing.pair_names[p].clone(), *e, truth));
            }
        }
        csv_rows(buf, &["time", "pair", "estimate", "truth"], rows)
    })?;
    out.write_json(
        "tomography.json",
        &echo,
        &json!({ "pairs": routing.pair_names, "links": routing.link_names, "report": report }),
    )?;
    timer.write(&a.common, &mut out, &echo)?;
    if let Some(m) = &report.metrics {
        eprintln!("mean relative error = {:.4}", m.mean_relative_error);
    }
    Ok(done(&out, report.windows.iter().all(|w| w.converged)))
}

fn cmd_sample(a: SampleArgs) -> Result<u8> {
    let mut timer = Timer::new();
    let mut echo = echo("sample", &a.common, Value::Null)?;
    let sys = load_input(&a.system, &mut echo)?;
    let n = sys.n_vars();
    let steps = a.mc_steps.unwrap_or_else(|| default_steps(n));
    let stride = a.stride.unwrap_or(n).max(1);
    let burn_in = a.burn_in.unwrap_or(steps / 10);
    echo.settings = json!({ "format": format!("{:?}", a.system.format), "mc_steps": steps, "stride": stride,
        "burn_in": burn_in, "bins": a.bins });
    let mut out = OutDir::create(&a.common.out)?;
    let c = chart(&sys)?;
    let names: Vec<String> = (0..n).map(|i| sys.var_name(i)).collect();
    let samples = sample_with_burn_in(&c, names.clone(), steps / stride, stride, burn_in, a.common.seed)?;
    timer.lap("sample");
    out.write_csv("samples.csv", &echo, |buf| Ok(samples.write_csv(buf)?))?;
    out.write_csv("histograms.csv", &echo, |buf| {
        let mut rows = Vec::new();
        for (i, name) in names.iter().enumerate() {
            let h = histogram(&samples.column(i), &uniform_edges(c.lower[i], c.upper[i], a.bins));
            for (b, mass) in h.mass.iter().enumerate() {
                rows.push((name.clone(), h.edges[b], h.edges[b + 1], *mass));
            }
        }
        csv_rows(buf, &["name", "bin_lower", "bin_upper", "mass"], rows)
    })?;
    let means: Vec<f64> = (0..n).map(|i| samples.mean(i)).collect();
    out.write_json(
        "sample.json",
        &echo,
        &json!({ "reduced_dim": c.reduced_dim(), "n_samples": samples.n_samples(), "names": names, "means": means }),
    )?;
    timer.write(&a.common, &mut out, &echo)?;
    Ok(done(&out, true))
}

fn cmd_gen(a: GenArgs) -> Result<u8> {
    let spec = spec_of(&a.ensemble, a.common.seed);
    let echo = echo("gen", &a.common, serde_json::to_value(spec)?)?;
    let sys = generate(&spec)?;
    let mut buf = Vec::new();
    write_json(&sys, &mut buf)?;
    let body: Value = serde_json::from_slice(&buf)?;
    let mut out = OutDir::create(&a.common.out)?;
    out.write_json("system.json", &echo, &body)?;
    let mut err = std::io::stderr();
    writeln!(err, "{} variables, {} equations", sys.n_vars(), sys.n_eqs())?;
    Ok(done(&out, true))
}
