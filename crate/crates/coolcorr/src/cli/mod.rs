//! Command line experiment runner.
//!
//! `coolcorr <subcommand> --config <path> [--out <path>] [--json <path>]
//! [--seed N] [--oracle-samples N] [--workers N]`
//!
//! Exit codes: 0 on success, 2 for infeasible or unsupported requests and
//! bad input, 3 for internal consistency failures.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{CoolError, Result};
use config::{ExperimentConfig, Scenario};
use output::Table;

#[derive(Debug, Parser)]
#[command(name = "coolcorr", version, about = "Cooling and correlating thermal quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coherent cooling: protocol traces, optimal work per target, repeated cycles.
    CoolCoherent(CommonArgs),
    /// Incoherent cooling: two-qubit cycles or the max-swap iteration.
    CoolIncoherent(CommonArgs),
    /// Universal bound state next to the protocol limit.
    Bound(CommonArgs),
    /// Temperature against work for single coherent and incoherent cycles.
    SweepFigure(CommonArgs),
    /// Symmetrically thermalizing unitaries over a grid of final temperatures.
    Correlate(CommonArgs),
    /// Doubly stochastic matrices of one construction.
    Stu(CommonArgs),
    /// Sampled maximum of the mutual information over energy budgets.
    Oracle(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional JSON mirror of the table.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    oracle_samples: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Command {
    fn split(self) -> (Scenario, CommonArgs) {
        match self {
            Command::CoolCoherent(a) => (Scenario::CoolCoherent, a),
            Command::CoolIncoherent(a) => (Scenario::CoolIncoherent, a),
            Command::Bound(a) => (Scenario::Bound, a),
            Command::SweepFigure(a) => (Scenario::SweepFigure, a),
            Command::Correlate(a) => (Scenario::Correlate, a),
            Command::Stu(a) => (Scenario::Stu, a),
            Command::Oracle(a) => (Scenario::Oracle, a),
        }
    }
}

fn io_error(path: &std::path::Path, e: std::io::Error) -> CoolError {
    CoolError::InvalidArgument(format!("{}: {e}", path.display()))
}

/// Loads the effective configuration for `scenario` with command line overrides.
pub fn load_config(
    scenario: Scenario,
    path: &std::path::Path,
    overrides: &[(&str, String)],
) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    ExperimentConfig::from_text(&text, scenario, overrides)
}

/// Runs a configuration and writes its outputs; returns the table.
pub fn execute(cfg: &ExperimentConfig) -> Result<Table> {
    let table = commands::run(cfg)?;
    let hash = cfg.hash();
    let csv = table.to_csv(&hash);
    match &cfg.output_path {
        Some(p) => std::fs::write(p, csv).map_err(|e| io_error(p.as_ref(), e))?,
        None => print!("{csv}"),
    }
    if let Some(p) = &cfg.json_path {
        std::fs::write(p, table.to_json(&hash)).map_err(|e| io_error(p.as_ref(), e))?;
    }
    Ok(table)
}

fn run_parsed(cli: Cli) -> Result<()> {
    let (scenario, args) = cli.command.split();
    let mut overrides: Vec<(&str, String)> = Vec::new();
    if let Some(s) = args.seed {
        overrides.push(("seed", s.to_string()));
    }
    if let Some(n) = args.oracle_samples {
        overrides.push(("oracle_samples", n.to_string()));
    }
    if let Some(n) = args.workers {
        overrides.push(("workers", n.to_string()));
    }
    if let Some(p) = &args.out {
        overrides.push(("output_path", p.display().to_string()));
    }
    if let Some(p) = &args.json {
        overrides.push(("json_path", p.display().to_string()));
    }
    let cfg = load_config(scenario, &args.config, &overrides)?;
    execute(&cfg).map(|_| ())
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_parsed(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
