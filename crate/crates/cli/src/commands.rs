use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde_json::json;

use lpconc::backtest::{full_range_baseline, report_for_run, sweep_grid, trajectory_csv};
use lpconc::market_data::indexer::{fetch_pool_history, IndexerConfig, TimeRange};
use lpconc::market_data::{
    fee_rate_series, load_pool_csv, median_fee_rate, read_pool_csv, write_pool_csv, PoolDataset,
    PoolMeta,
};
use lpconc::optimizer::{
    alpha_grid, export_minlp, optimize_alpha_repeated, SaaConfig, DEFAULT_ALPHA_BOUNDS,
    DEFAULT_GRID_STEP, DEFAULT_REFINE_TOLERANCE,
};
use lpconc::stochastic::{estimate_sigma, sample_gbm_path, GbmParams};
use lpconc::strategy::{run_strategy, FeeRates, StrategyParams};

use crate::settings::Resolver;
use crate::{
    BacktestArgs, CliError, CostArgs, EstimateArgs, ExportArgs, FetchArgs, ModelArgs,
    OptimizeArgs, SaaArgs, SimulateArgs, SourceArgs, SweepArgs,
};

const BUNDLED_SAMPLE: &str = include_str!("../../core/tests/fixtures/usdc_weth_hourly.csv");

const DEFAULT_GAS: f64 = 109.8;
const DEFAULT_TRADE_FEE: f64 = 0.0005;
const DEFAULT_WEALTH: f64 = 100_000.0;
const DEFAULT_HORIZON: usize = 10;
const DEFAULT_PATHS: usize = 30;
const DEFAULT_SEED: u64 = 1;

pub struct Context {
    pub cfg: Resolver,
    pub out_dir: PathBuf,
}

impl Context {
    fn output(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Four significant digits for terminal output.
pub fn sig4(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..4).contains(&mag) {
        format!("{:.*}", (3 - mag) as usize, v)
    } else if (4..9).contains(&mag) {
        let unit = 10f64.powi(mag - 3);
        format!("{:.0}", (v / unit).round() * unit)
    } else {
        format!("{v:.3e}")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    write_file(path, &(text + "\n"))
}

fn load_csv(path: &str) -> Result<PoolDataset, CliError> {
    load_pool_csv(path).map_err(|e| match e {
        lpconc::Error::Io(source) => CliError::Io {
            path: PathBuf::from(path),
            source,
        },
        other => CliError::Usage(format!("{path}: {other}")),
    })
}

fn bundled_sample() -> PoolDataset {
    read_pool_csv(BUNDLED_SAMPLE.as_bytes(), PoolMeta::default()).expect("bundled sample is valid")
}

/// UNIX seconds or a UTC calendar date.
fn parse_time(key: &str, raw: &str) -> Result<i64, CliError> {
    if let Ok(secs) = raw.parse::<i64>() {
        return Ok(secs);
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp())
        .map_err(|_| {
            CliError::Usage(format!("--{key}: expected UNIX seconds or YYYY-MM-DD, got `{raw}`"))
        })
}

/// `low:high:step` via [`alpha_grid`], or a comma-separated list.
fn parse_values(key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("--{key}: expected `low:high:step` or `a,b,c`, got `{raw}`"));
    let nums = |sep: char| -> Result<Vec<f64>, CliError> {
        raw.split(sep)
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    };
    if raw.contains(':') {
        let parts = nums(':')?;
        let [low, high, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0 && high >= low && low.is_finite() && high.is_finite()) {
            return Err(bad());
        }
        Ok(alpha_grid(low, high, step))
    } else {
        nums(',')
    }
}

enum Source {
    Csv(String),
    Indexer {
        config: IndexerConfig,
        pool: String,
        range: TimeRange,
    },
}

fn resolve_source(cfg: &mut Resolver, a: SourceArgs) -> Result<Source, CliError> {
    let csv = cfg.get::<String>("csv", a.csv)?;
    let pool = cfg.get::<String>("pool", a.pool)?;
    match (csv, pool) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "conflicting data sources: give either --csv or --pool, not both".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "no data source: give --csv FILE, or --pool with --endpoint, --start and --end".into(),
        )),
        (Some(csv), None) => Ok(Source::Csv(csv)),
        (None, Some(pool)) => {
            let endpoint = cfg.require::<String>("endpoint", a.endpoint)?;
            let start_raw = cfg.require::<String>("start", a.start)?;
            let end_raw = cfg.require::<String>("end", a.end)?;
            let range = TimeRange {
                start: parse_time("start", &start_raw)?,
                end: parse_time("end", &end_raw)?,
            };
            let mut config = IndexerConfig::new(endpoint);
            config.x_token = cfg.or("x-token", a.x_token, config.x_token)?;
            config.page_size = cfg.or("page-size", a.page_size, config.page_size)?;
            Ok(Source::Indexer { config, pool, range })
        }
    }
}

fn load_source(source: &Source) -> Result<PoolDataset, CliError> {
    match source {
        Source::Csv(path) => load_csv(path),
        Source::Indexer { config, pool, range } => Ok(fetch_pool_history(config, pool, *range)?),
    }
}

fn strategy_costs(cfg: &mut Resolver, a: CostArgs) -> Result<(f64, f64, f64), CliError> {
    Ok((
        cfg.or("gas", a.gas, DEFAULT_GAS)?,
        cfg.or("trade-fee", a.trade_fee, DEFAULT_TRADE_FEE)?,
        cfg.or("wealth", a.wealth, DEFAULT_WEALTH)?,
    ))
}

/// σ, initial price and constant fee rate; missing values come from the
/// dataset and are echoed so the run can be replayed without it.
fn resolve_model(cfg: &mut Resolver, a: ModelArgs) -> Result<(GbmParams, f64), CliError> {
    let sigma = cfg.get::<f64>("sigma", a.sigma)?;
    let price = cfg.get::<f64>("initial-price", a.initial_price)?;
    let fee = cfg.get::<f64>("fee-rate", a.fee_rate)?;
    let csv = cfg.get::<String>("csv", a.csv)?;
    let (sigma, price, fee) = match (sigma, price, fee) {
        (Some(s), Some(p), Some(f)) => (s, p, f),
        (s, p, f) => {
            let data = match &csv {
                Some(path) => load_csv(path)?,
                None => bundled_sample(),
            };
            let s = match s {
                Some(s) => s,
                None => estimate_sigma(&data.marginal_prices())?,
            };
            let p = p.unwrap_or(data.rows()[0].price);
            let f = match f {
                Some(f) => f,
                None => median_fee_rate(&fee_rate_series(&data))?,
            };
            cfg.note("sigma", &s);
            cfg.note("initial-price", &p);
            cfg.note("fee-rate", &f);
            (s, p, f)
        }
    };
    if !(fee.is_finite() && fee >= 0.0) {
        return Err(CliError::Usage(format!("fee rate must be nonnegative, got {fee}")));
    }
    Ok((GbmParams::new(sigma, price)?, fee))
}

fn saa_config(cfg: &mut Resolver, a: SaaArgs, model: GbmParams) -> Result<SaaConfig, CliError> {
    let horizon = cfg.or("T", a.horizon, DEFAULT_HORIZON)?;
    let paths = cfg.or("S", a.paths, DEFAULT_PATHS)?;
    let seed = cfg.or("seed", a.seed, DEFAULT_SEED)?;
    let mut config = SaaConfig::new(model, paths, horizon, seed);
    config.alpha_bounds = (
        cfg.or("alpha-low", a.alpha_low, DEFAULT_ALPHA_BOUNDS.0)?,
        cfg.or("alpha-high", a.alpha_high, DEFAULT_ALPHA_BOUNDS.1)?,
    );
    config.grid_step = cfg.or("grid-step", a.grid_step, DEFAULT_GRID_STEP)?;
    config.refine_tolerance = cfg.or("refine-tol", a.refine_tol, DEFAULT_REFINE_TOLERANCE)?;
    config.validate()?;
    Ok(config)
}

fn describe_dataset(data: &PoolDataset) {
    let rows = data.rows();
    println!(
        "rows {}  steps {}  from {} to {}",
        data.len(),
        data.steps(),
        rows[0].timestamp,
        rows[rows.len() - 1].timestamp
    );
    let gaps = data.gaps();
    if !gaps.is_empty() {
        let longest = gaps.iter().map(|g| g.seconds).max().unwrap_or(0);
        println!("gaps {}  longest {} s", gaps.len(), longest);
    }
}

pub fn fetch(mut ctx: Context, a: FetchArgs) -> Result<(), CliError> {
    let out = ctx.cfg.get::<String>("out", a.out)?;
    let source = resolve_source(&mut ctx.cfg, a.source)?;
    if let Source::Csv(_) = source {
        return Err(CliError::Usage(
            "fetch reads from an indexer: give --pool, --endpoint, --start and --end instead of --csv"
                .into(),
        ));
    }
    let out = out.map(PathBuf::from).unwrap_or_else(|| ctx.output("pool.csv"));
    ctx.cfg.note("out", &out.display());
    println!("{}", ctx.cfg.provenance("fetch"));
    let data = load_source(&source)?;
    write_pool_csv(&data, &out).map_err(|e| match e {
        lpconc::Error::Io(source) => CliError::Io {
            path: out.clone(),
            source,
        },
        other => other.into(),
    })?;
    describe_dataset(&data);
    println!("wrote {}", out.display());
    Ok(())
}

pub fn estimate(mut ctx: Context, a: EstimateArgs) -> Result<(), CliError> {
    let source = resolve_source(&mut ctx.cfg, a.source)?;
    println!("{}", ctx.cfg.provenance("estimate"));
    let data = load_source(&source)?;
    let sigma = estimate_sigma(&data.marginal_prices())?;
    let fees = fee_rate_series(&data);
    let median = median_fee_rate(&fees)?;
    let mean = fees.rates().iter().sum::<f64>() / fees.len() as f64;
    describe_dataset(&data);
    println!("sigma            {}", sig4(sigma));
    println!("median fee rate  {}", sig4(median));
    println!("mean fee rate    {}", sig4(mean));
    let path = ctx.output("estimate.json");
    write_json(
        &path,
        &json!({
            "rows": data.len(),
            "steps": data.steps(),
            "gaps": data.gaps().len(),
            "sigma": sigma,
            "median_fee_rate": median,
            "mean_fee_rate": mean,
            "initial_price": data.rows()[0].price,
            "final_price": data.rows()[data.len() - 1].price,
        }),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn simulate(mut ctx: Context, a: SimulateArgs) -> Result<(), CliError> {
    let cfg = &mut ctx.cfg;
    let (model, fee) = resolve_model(cfg, a.model)?;
    let (gas, trade_fee, wealth) = strategy_costs(cfg, a.costs)?;
    let alpha = cfg.or("alpha", a.alpha, 2.0)?;
    let gamma = cfg.or("gamma", a.gamma, 0.0)?;
    let horizon = cfg.or("T", a.horizon, DEFAULT_HORIZON)?;
    let seed = cfg.or("seed", a.seed, DEFAULT_SEED)?;
    let index = cfg.or("path-index", a.path_index, 0)?;
    println!("{}", cfg.provenance("simulate"));
    if horizon == 0 {
        return Err(CliError::Usage("--T must be at least 1".into()));
    }
    let params = StrategyParams::new(alpha, gamma, gas, trade_fee)?;
    let path = sample_gbm_path(&model, horizon, seed, index);
    let run = run_strategy(&path, FeeRates::Constant(fee), &params, wealth)?;

    let profit_pct = 100.0 * (run.terminal_wealth - wealth) / wealth;
    println!("terminal wealth  {}", sig4(run.terminal_wealth));
    println!("profit %         {}", sig4(profit_pct));
    println!("reallocations    {}", run.reallocation_count());
    println!("fees             {}", sig4(run.total_fees()));
    println!("costs            {}", sig4(run.total_costs()));
    if let Some(t) = run.ruin_step {
        println!("ruined at step   {t}");
    }
    let traj = ctx.output("simulate_trajectory.csv");
    write_file(&traj, &trajectory_csv(&run, &path))?;
    let summary = ctx.output("simulate.json");
    write_json(
        &summary,
        &json!({
            "model": model,
            "fee_rate": fee,
            "params": params,
            "seed": seed,
            "path_index": index,
            "horizon": horizon,
            "initial_wealth": wealth,
            "terminal_wealth": run.terminal_wealth,
            "profit_pct": profit_pct,
            "reallocation_count": run.reallocation_count(),
            "total_fees": run.total_fees(),
            "total_costs": run.total_costs(),
            "ruin_step": run.ruin_step,
        }),
    )?;
    println!("wrote {} and {}", traj.display(), summary.display());
    Ok(())
}

pub fn optimize(mut ctx: Context, a: OptimizeArgs) -> Result<(), CliError> {
    let cfg = &mut ctx.cfg;
    let (model, fee) = resolve_model(cfg, a.model)?;
    let (gas, trade_fee, wealth) = strategy_costs(cfg, a.costs)?;
    let config = saa_config(cfg, a.saa, model)?;
    let repeats = cfg.or("repeats", a.repeats, 1)?;
    println!("{}", cfg.provenance("optimize"));
    let params = StrategyParams::new(config.alpha_bounds.0, 0.0, gas, trade_fee)?;
    let result =
        optimize_alpha_repeated(&config, repeats, FeeRates::Constant(fee), &params, wealth)?;

    println!("{:>6}  {:>8}  {:>12}  {:>10}", "seed", "alpha*", "objective", "time ms");
    for r in &result.runs {
        println!(
            "{:>6}  {:>8}  {:>12}  {:>10}",
            r.seed,
            sig4(r.alpha_star),
            sig4(r.objective_value),
            sig4(1e3 * r.wall_time_secs)
        );
    }
    let (s, t) = (&result.alpha_stats, &result.runtime_stats);
    println!("{:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}", "", "mean", "median", "min", "max", "std");
    println!(
        "{:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}",
        "alpha*",
        sig4(s.mean),
        sig4(s.median),
        sig4(s.min),
        sig4(s.max),
        sig4(s.std_dev)
    );
    println!(
        "{:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}",
        "time ms",
        sig4(1e3 * t.mean),
        sig4(1e3 * t.median),
        sig4(1e3 * t.min),
        sig4(1e3 * t.max),
        sig4(1e3 * t.std_dev)
    );
    let path = ctx.output("optimize.json");
    write_json(
        &path,
        &json!({
            "config": config,
            "fee_rate": fee,
            "gas_cost": gas,
            "trade_fee": trade_fee,
            "initial_wealth": wealth,
            "repeats": repeats,
            "result": result,
        }),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn backtest(mut ctx: Context, a: BacktestArgs) -> Result<(), CliError> {
    let cfg = &mut ctx.cfg;
    let source = resolve_source(cfg, a.source)?;
    let (gas, trade_fee, wealth) = strategy_costs(cfg, a.costs)?;
    let alpha = cfg.require("alpha", a.alpha)?;
    let gamma = cfg.or("gamma", a.gamma, 0.0)?;
    println!("{}", cfg.provenance("backtest"));
    let params = StrategyParams::new(alpha, gamma, gas, trade_fee)?;
    let data = load_source(&source)?;
    let path = data.price_path()?;
    let fees = fee_rate_series(&data);
    let run = run_strategy(&path, FeeRates::PerStep(fees.rates()), &params, wealth)?;
    let report = report_for_run(&data, &run)?;
    let full = full_range_baseline(&data, wealth)?;

    describe_dataset(&data);
    println!("{:>12}  {:>10}  {:>10}  {:>10}", "", "profit %", "fees/step %", "reallocs");
    for (name, r) in [("strategy", &report), ("full range", &full)] {
        println!(
            "{:>12}  {:>10}  {:>10}  {:>10}",
            name,
            sig4(r.terminal_profit_pct),
            sig4(r.fees_per_step_pct),
            r.reallocation_count
        );
    }
    println!("{:>12}  {:>10}", "hold", sig4(report.hold_profit_pct));
    if let Some(t) = report.ruin_step {
        println!("ruined at step {t}");
    }
    let report_path = ctx.output("backtest.json");
    let traj_path = ctx.output("backtest_trajectory.csv");
    let full_path = ctx.output("full_range.json");
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e: lpconc::Error| match e {
            lpconc::Error::Io(source) => CliError::Io { path: p, source },
            other => other.into(),
        }
    };
    report.write_json(&report_path).map_err(io(&report_path))?;
    full.write_json(&full_path).map_err(io(&full_path))?;
    write_file(&traj_path, &trajectory_csv(&run, &path))?;
    println!(
        "wrote {}, {} and {}",
        report_path.display(),
        traj_path.display(),
        full_path.display()
    );
    Ok(())
}

pub fn sweep(mut ctx: Context, a: SweepArgs) -> Result<(), CliError> {
    let cfg = &mut ctx.cfg;
    let source = resolve_source(cfg, a.source)?;
    let (gas, trade_fee, wealth) = strategy_costs(cfg, a.costs)?;
    let alpha_spec = cfg.or("alpha", a.alpha, "1.01:4:0.01".to_string())?;
    let gamma_spec = cfg.or("gamma", a.gamma, "0".to_string())?;
    let alphas = parse_values("alpha", &alpha_spec)?;
    let gammas = parse_values("gamma", &gamma_spec)?;
    println!("{}", cfg.provenance("sweep"));
    let data = load_source(&source)?;
    // α and γ are per cell; 2 is a placeholder that passes validation
    let params = StrategyParams::new(2.0, 0.0, gas, trade_fee)?;
    let result = sweep_grid(&data, &alphas, &gammas, &params, wealth)?;
    let invalid = result.cells.iter().filter(|c| c.report.is_none()).count();
    println!(
        "{} alphas x {} gammas = {} cells ({} invalid)",
        alphas.len(),
        gammas.len(),
        result.cells.len(),
        invalid
    );
    if let Some(best) = result.best() {
        let r = best.report.as_ref().expect("best cell has a report");
        println!(
            "best: alpha {} gamma {}  profit % {}  reallocs {}",
            sig4(best.alpha),
            sig4(best.gamma),
            sig4(r.terminal_profit_pct),
            r.reallocation_count
        );
    }
    let path = ctx.output("sweep.csv");
    write_file(&path, &result.to_csv())?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn export_model(mut ctx: Context, a: ExportArgs) -> Result<(), CliError> {
    let cfg = &mut ctx.cfg;
    let (model, fee) = resolve_model(cfg, a.model)?;
    let (gas, trade_fee, wealth) = strategy_costs(cfg, a.costs)?;
    let config = saa_config(cfg, a.saa, model)?;
    let big_m = cfg.get::<f64>("big-m", a.big_m)?;
    let out = cfg.get::<String>("out", a.out)?;
    let out = out.map(PathBuf::from).unwrap_or_else(|| ctx.output("model.minlp"));
    println!("{}", ctx.cfg.provenance("export-model"));
    let params = StrategyParams::new(config.alpha_bounds.0, 0.0, gas, trade_fee)?;
    let paths = config.sample_paths()?;
    let doc = export_minlp(&paths, &config, fee, &params, wealth, big_m)?;
    println!(
        "variables {} ({} binary)  constraints {}  big-M {}",
        doc.variables.len(),
        doc.binary_count(),
        doc.constraints.len(),
        sig4(doc.header.big_m)
    );
    write_file(&out, &doc.to_string())?;
    println!("wrote {}", out.display());
    Ok(())
}
