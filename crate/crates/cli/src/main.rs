//! `vmbpbb` command-line tool.

mod commands;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vmbpbb::{EdgePolicy, FilterSpec, Mode};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "vmbpbb", version, about = "Band-pass periodic block bootstrap for multiple periodic components")]
struct Cli {
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true, env = "VMBPBB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a series into KZFT band-pass components.
    Filter(FilterArgs),
    /// Bootstrap confidence bands for each component and their sum.
    Run(RunArgs),
    /// Monte-Carlo comparison of VMBPBB against PBB over a grid of scenarios.
    Simulate(SimulateArgs),
    /// Tabulate KZFT energy transfer curves.
    Transfer(TransferArgs),
    /// Rebuild the simulation tables from a per-repetition log.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EdgeArg {
    Renormalize,
    Truncate,
}

impl From<EdgeArg> for EdgePolicy {
    fn from(e: EdgeArg) -> Self {
        match e {
            EdgeArg::Renormalize => EdgePolicy::Renormalize,
            EdgeArg::Truncate => EdgePolicy::Truncate,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Vmbpbb,
    Pbb,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Vmbpbb => Mode::Vmbpbb,
            ModeArg::Pbb => Mode::Pbb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Desk,
    Paper,
}

/// Parses `m=201,k=1,nu=0.02`.
fn parse_spec(s: &str) -> Result<FilterSpec, String> {
    let (mut m, mut k, mut nu) = (None, None, None);
    for part in s.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| format!("expected key=value, got `{part}`"))?;
        let value = value.trim();
        match key.trim() {
            "m" => m = Some(value.parse::<usize>().map_err(|e| format!("m: {e}"))?),
            "k" => k = Some(value.parse::<usize>().map_err(|e| format!("k: {e}"))?),
            "nu" => nu = Some(value.parse::<f64>().map_err(|e| format!("nu: {e}"))?),
            other => return Err(format!("unknown key `{other}`")),
        }
    }
    let m = m.ok_or("missing m")?;
    let nu = nu.ok_or("missing nu")?;
    FilterSpec::new(m, k.unwrap_or(1), nu).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// Input CSV with header `t,value`.
    #[arg(long, short)]
    input: PathBuf,
    /// Periods; filters are chosen automatically.
    #[arg(long, value_delimiter = ',', required_unless_present = "spec", conflicts_with = "spec")]
    periods: Vec<usize>,
    /// Explicit filter, e.g. `m=201,k=1,nu=0.02`. Repeatable.
    #[arg(long, value_parser = parse_spec)]
    spec: Vec<FilterSpec>,
    #[arg(long, default_value_t = 1.0)]
    narrow_factor: f64,
    #[arg(long, value_enum, default_value = "renormalize")]
    edge: EdgeArg,
    /// Output CSV; the manifest is written next to it.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// JSON file with pipeline settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Bootstrap resamples.
    #[arg(long, short = 'B')]
    resamples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    narrow_factor: Option<f64>,
    #[arg(long, value_enum)]
    edge: Option<EdgeArg>,
    #[arg(long, short)]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON grid configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `desk` (B=200, 50 repetitions) or `paper` (B=1000, 1000 repetitions).
    #[arg(long, value_enum, default_value = "desk")]
    scale: Scale,
    /// Narrow the {10,25} filters at 1:2 and 1:5, as in the published tables.
    #[arg(long)]
    paper_faithful: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short = 'B')]
    resamples: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, short)]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct TransferArgs {
    /// Window lengths.
    #[arg(long, value_delimiter = ',', required_unless_present = "spec")]
    m: Vec<usize>,
    /// Iteration counts.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<usize>,
    /// Centre frequencies.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    nu: Vec<f64>,
    /// Extra explicit filters, e.g. `m=201,k=1,nu=0.02`. Repeatable.
    #[arg(long, value_parser = parse_spec)]
    spec: Vec<FilterSpec>,
    /// Evaluate at these frequencies instead of a grid.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Grid points on [0, lambda-max].
    #[arg(long, default_value_t = 501)]
    points: usize,
    #[arg(long, default_value_t = 0.5)]
    lambda_max: f64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// `repetitions.csv` written by `simulate`.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(&CliError::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::Config(format!("thread pool: {e}")));
        }
    }
    let result = match cli.command {
        Command::Filter(a) => commands::filter(a),
        Command::Run(a) => commands::run(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Transfer(a) => commands::transfer(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    let category = e.category();
    eprintln!("error[{}]: {e}", category.as_str());
    ExitCode::from(category.exit_code() as u8)
}
