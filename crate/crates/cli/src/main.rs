//! `lpconc`: estimation, simulation, α optimization, backtests, sweeps and
//! model export for concentrated-liquidity positions.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::settings::{Resolver, SettingsFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] lpconc::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Core(e) if e.is_environmental() => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lpconc", version, about = "Concentrated-liquidity strategy toolkit")]
pub struct Cli {
    /// Settings file of `key = value` lines; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for output files [default: .]
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download hourly pool snapshots from a GraphQL indexer into CSV.
    Fetch(FetchArgs),
    /// Estimate σ and the median fee rate from a pool CSV.
    Estimate(EstimateArgs),
    /// Run one strategy over one sampled GBM path.
    Simulate(SimulateArgs),
    /// Choose α by sample-average approximation over GBM paths.
    Optimize(OptimizeArgs),
    /// Run one strategy over historical data.
    Backtest(BacktestArgs),
    /// Backtest a grid of (α, γ) values.
    Sweep(SweepArgs),
    /// Write the mixed-integer model of the SAA problem.
    ExportModel(ExportArgs),
}

/// Where to read pool history from: a CSV or a live indexer query.
#[derive(Debug, Args, Default)]
pub struct SourceArgs {
    /// Pool CSV (`<file>.meta.json` is read when present).
    #[arg(long, value_name = "FILE")]
    pub csv: Option<String>,
    /// GraphQL endpoint of the indexer.
    #[arg(long, env = lpconc::market_data::indexer::ENDPOINT_ENV, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Pool contract address.
    #[arg(long)]
    pub pool: Option<String>,
    /// Range start: UNIX seconds or YYYY-MM-DD (UTC).
    #[arg(long)]
    pub start: Option<String>,
    /// Range end, exclusive: UNIX seconds or YYYY-MM-DD (UTC).
    #[arg(long)]
    pub end: Option<String>,
    /// Which pool token (0 or 1) is the volatile asset x.
    #[arg(long)]
    pub x_token: Option<u8>,
    /// Rows per indexer request.
    #[arg(long)]
    pub page_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Gas cost per reallocation, in y units [default: 109.8]
    #[arg(long)]
    pub gas: Option<f64>,
    /// Trading fee on rebalancing volume [default: 0.0005]
    #[arg(long)]
    pub trade_fee: Option<f64>,
    /// Initial wealth in y units [default: 100000]
    #[arg(long)]
    pub wealth: Option<f64>,
}

/// GBM and fee inputs. Anything not given is estimated from `--csv`, or
/// from the bundled sample dataset when no CSV is given.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Per-step volatility of the price.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Price at t = 0.
    #[arg(long)]
    pub initial_price: Option<f64>,
    /// Fee income per unit of liquidity per step.
    #[arg(long)]
    pub fee_rate: Option<f64>,
    /// Pool CSV to estimate missing inputs from.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<String>,
}

#[derive(Debug, Args)]
pub struct SaaArgs {
    /// Steps per scenario [default: 10]
    #[arg(long = "T", visible_alias = "horizon", value_name = "STEPS")]
    pub horizon: Option<usize>,
    /// Number of scenarios [default: 30]
    #[arg(long = "S", visible_alias = "paths", value_name = "PATHS")]
    pub paths: Option<usize>,
    /// Base seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lower α bound [default: 1.01]
    #[arg(long)]
    pub alpha_low: Option<f64>,
    /// Upper α bound [default: 4]
    #[arg(long)]
    pub alpha_high: Option<f64>,
    /// Coarse grid spacing [default: 0.01]
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Golden-section tolerance [default: 0.0001]
    #[arg(long)]
    pub refine_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Output CSV [default: <out-dir>/pool.csv]
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub costs: CostArgs,
    /// Interval width ratio [default: 2]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Trigger threshold in sqrt-price units [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Steps [default: 10]
    #[arg(long = "T", visible_alias = "horizon", value_name = "STEPS")]
    pub horizon: Option<usize>,
    /// Seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stream index of the path within the seed [default: 0]
    #[arg(long)]
    pub path_index: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub costs: CostArgs,
    #[command(flatten)]
    pub saa: SaaArgs,
    /// Independent repetitions on seeds seed, seed+1, … [default: 1]
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub costs: CostArgs,
    /// Interval width ratio.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Trigger threshold in sqrt-price units [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub costs: CostArgs,
    /// α values: `low:high:step` or a comma list [default: 1.01:4:0.01]
    #[arg(long)]
    pub alpha: Option<String>,
    /// γ values: `low:high:step` or a comma list [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub costs: CostArgs,
    #[command(flatten)]
    pub saa: SaaArgs,
    /// Big-M constant [default: 4 × the smallest safe value]
    #[arg(long)]
    pub big_m: Option<f64>,
    /// Output file [default: <out-dir>/model.minlp]
    #[arg(long)]
    pub out: Option<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => SettingsFile::load(path)?,
        None => SettingsFile::default(),
    };
    let mut cfg = Resolver::new(file);
    let out_dir = PathBuf::from(cfg.or("out-dir", cli.out_dir, ".".to_string())?);
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.clone(),
        source,
    })?;
    let ctx = commands::Context { cfg, out_dir };
    match cli.command {
        Command::Fetch(a) => commands::fetch(ctx, a),
        Command::Estimate(a) => commands::estimate(ctx, a),
        Command::Simulate(a) => commands::simulate(ctx, a),
        Command::Optimize(a) => commands::optimize(ctx, a),
        Command::Backtest(a) => commands::backtest(ctx, a),
        Command::Sweep(a) => commands::sweep(ctx, a),
        Command::ExportModel(a) => commands::export_model(ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return ExitCode::from(1);
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first} (see `lpconc --help`)");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
