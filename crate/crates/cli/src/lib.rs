//! `rbc`: build, query and benchmark Random Ball Cover indexes.
//!
//! Every command echoes its fully resolved configuration to stderr as
//! `# key = value` lines before doing any work.

mod bench;
mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rbc_core::{MatrixFormat, MetricKind, RbcError, SamplingMode};

pub use bench::{parse_grid, BenchRow};

#[derive(Debug, Parser)]
#[command(name = "rbc", version, about = "Random Ball Cover nearest-neighbor search")]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic point set.
    Gen(GenArgs),
    /// Random-project a point set to fewer dimensions.
    Project(ProjectArgs),
    /// Build an index file.
    Build(BuildArgs),
    /// Answer queries against an index file.
    Query(QueryArgs),
    /// Sweep variants, parameters and seeds against a brute-force baseline.
    Bench(BenchArgs),
    /// Rank error of query results.
    EvalRank(EvalRankArgs),
    /// Estimate the expansion rate and suggest parameters.
    EstimateC(EstimateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    L2,
    L1,
}

impl From<Metric> for MetricKind {
    fn from(m: Metric) -> Self {
        match m {
            Metric::L2 => MetricKind::Euclidean,
            Metric::L1 => MetricKind::Manhattan,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Bernoulli,
    Fixed,
}

impl From<Mode> for SamplingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Bernoulli => SamplingMode::Bernoulli,
            Mode::Fixed => SamplingMode::FixedCount,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Binary,
    Csv,
}

impl From<Format> for MatrixFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Binary => MatrixFormat::Binary,
            Format::Csv => MatrixFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Variant {
    Brute,
    Exact,
    Oneshot,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// uniform, grid, or gaussian[:clusters[:sigma]]
    #[arg(long, default_value = "uniform")]
    pub kind: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Output format; inferred from the `--out` extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output dimension.
    #[arg(long = "k", visible_alias = "dim")]
    pub target_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Output format; inferred from the `--out` extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Variant::Exact)]
    pub variant: Variant,
    /// Representatives; defaults to the standard (exact) or one-shot setting.
    #[arg(long)]
    pub nr: Option<usize>,
    /// One-shot list size; defaults to the one-shot setting.
    #[arg(long)]
    pub s: Option<usize>,
    /// Expansion-rate estimate used for default parameters.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Target failure probability for default one-shot parameters.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = Metric::L2)]
    pub metric: Metric,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Bernoulli)]
    pub mode: Mode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Comma-separated variants to sweep; brute force always runs first.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Variant::Exact, Variant::Oneshot])]
    pub variant: Vec<Variant>,
    /// Representative counts: integers or multiples of ⌈√n⌉ such as `0.5x`.
    #[arg(long, value_delimiter = ',')]
    pub nr: Vec<String>,
    /// One-shot list sizes, same syntax as --nr.
    #[arg(long, value_delimiter = ',')]
    pub s: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64])]
    pub seed: Vec<u64>,
    #[arg(long, value_enum, default_value_t = Metric::L2)]
    pub metric: Metric,
    #[arg(long, value_enum, default_value_t = Mode::Bernoulli)]
    pub mode: Mode,
    /// Failure probability for the default one-shot setting.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalRankArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// CSV written by `rbc query`.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, value_enum, default_value_t = Metric::L2)]
    pub metric: Metric,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Also include these points (the expansion condition is on X ∪ Q).
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Metric::L2)]
    pub metric: Metric,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 16)]
    pub radii: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

pub(crate) fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Brute => "brute",
        Variant::Exact => "exact",
        Variant::Oneshot => "oneshot",
    }
}

pub fn run(cli: Cli) -> Result<(), RbcError> {
    let workers = cli.workers;
    eprintln!("# workers = {}", if workers == 0 { "all".to_string() } else { workers.to_string() });
    rbc_core::with_workers(Some(workers), move || match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Project(a) => commands::project(a),
        Command::Build(a) => commands::build(a),
        Command::Query(a) => commands::query(a),
        Command::Bench(a) => bench::run(a),
        Command::EvalRank(a) => commands::eval_rank(a),
        Command::EstimateC(a) => commands::estimate_c(a),
    })?
}
