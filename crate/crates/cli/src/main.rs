//! `bpbeta` command-line driver.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | bad arguments, unreadable or malformed input, other errors |
//! | 2 | the system is infeasible |
//! | 3 | message passing did not converge (reports are still written) |

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_PARSE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "bpbeta",
    version,
    about = "Marginals and log-volume of box-bounded linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run message passing on one system; writes marginals.csv and entropy.json.
    Solve(SolveArgs),
    /// Compare BP volumes with exact volumes over a random ensemble.
    Benchmark(BenchmarkArgs),
    /// Probability of convergence against mean equation degree.
    Converge(ConvergeArgs),
    /// Entropy drop when each variable's range is reduced.
    Knockdown(KnockdownArgs),
    /// Origin-destination flow estimates from link loads.
    Tomography(TomographyArgs),
    /// Hit-and-run samples of the uniform distribution on the polytope.
    Sample(SampleArgs),
    /// Write a random system.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl OnOff {
    pub fn is_on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    TripletCsv,
    DenseCsv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScheduleArg {
    Sequential,
    Synchronous,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EnsembleArg {
    Er,
    SmallWorld,
    ScaleFree,
}

/// Settings shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Convergence tolerance on the largest message change.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.0)]
    pub damping: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Sequential)]
    pub schedule: ScheduleArg,
    /// Tighten boxes to exact ranges by linear programming (default: on for knockdown only).
    #[arg(long, value_enum)]
    pub exact_bounds: Option<OnOff>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write timings.json (wall-clock, so not reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SystemInput {
    /// System file (JSON, dense CSV, or triplet CSV `eq,var,coeff`).
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Triplet format: `var,lower,upper`.
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    /// Triplet format: `eq,y`.
    #[arg(long)]
    pub rhs: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EnsembleInput {
    #[arg(long, value_enum, default_value_t = EnsembleArg::Er)]
    pub ensemble: EnsembleArg,
    /// Number of variables.
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    /// Number of equations.
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Mean variables per equation (ER).
    #[arg(long, default_value_t = 3.0)]
    pub k: f64,
    /// Random links added to the ring (small world).
    #[arg(long, default_value_t = 4)]
    pub extra_links: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lower: f64,
    #[arg(long, default_value_t = 1.0)]
    pub upper: f64,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub system: SystemInput,
    #[command(flatten)]
    pub common: Common,
    /// Exact volume by vertex enumeration, for small reduced dimension.
    #[arg(long, value_enum, default_value_t = OnOff::Off)]
    pub oracle: OnOff,
    /// Hit-and-run steps for a marginal comparison; omitted skips it.
    #[arg(long)]
    pub mc_steps: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub ensemble: EnsembleInput,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    pub oracle: OnOff,
    #[arg(long)]
    pub mc_steps: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Args, Debug)]
pub struct ConvergeArgs {
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    /// Mean degrees to scan.
    #[arg(long, value_delimiter = ',', default_values_t = vec![3.0, 4.0, 6.0, 8.0, 10.0])]
    pub ks: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KnockRuleArg {
    Symmetric,
    UpperOnly,
}

#[derive(Args, Debug)]
pub struct KnockdownArgs {
    /// System file; omitted uses the built-in red blood cell network.
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub factor: f64,
    #[arg(long, value_enum, default_value_t = KnockRuleArg::Symmetric)]
    pub rule: KnockRuleArg,
    /// Start each knock-down from the wild-type messages.
    #[arg(long)]
    pub warm_start: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundRuleArg {
    GlobalMax,
    PerPairMax,
}

#[derive(Args, Debug)]
pub struct TomographyArgs {
    /// `pair,link` rows; omitted uses the built-in 11-node backbone.
    #[arg(long, requires = "loads")]
    pub routing: Option<PathBuf>,
    /// `time,link,load` rows.
    #[arg(long)]
    pub loads: Option<PathBuf>,
    /// `time,pair,flow` rows of ground truth.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Windows of synthetic traffic when no loads are given.
    #[arg(long, default_value_t = 24)]
    pub windows: usize,
    #[arg(long, value_enum, default_value_t = BoundRuleArg::GlobalMax)]
    pub rule: BoundRuleArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub system: SystemInput,
    /// Total hit-and-run steps after burn-in (default 50 N^2).
    #[arg(long)]
    pub mc_steps: Option<usize>,
    /// Steps between recorded samples (default N).
    #[arg(long)]
    pub stride: Option<usize>,
    /// Default: a tenth of the steps.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub ensemble: EnsembleInput,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_PARSE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<bpbeta::Error>() {
        Some(bpbeta::Error::Infeasible(_)) => EXIT_INFEASIBLE,
        _ => EXIT_PARSE,
    }
}
