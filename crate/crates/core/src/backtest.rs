//! Historical replay of the strategy, parameter sweeps and baselines.
//!
//! Backtests use the realized per-step fee rates of the dataset. Profits
//! are relative to the initial wealth and count unclaimed fees at face
//! value. Per-step averages divide by the number of steps in the data, or
//! by the ruin step when the position is wiped out.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amm::{hold_value, Reserves, SqrtPrice};
use crate::error::{Error, Result};
use crate::market_data::{fee_rate_series, PoolDataset};
use crate::stochastic::PricePath;
use crate::strategy::{run_strategy, FeeRates, Side, StrategyParams, StrategyRun};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    /// Steps in the dataset.
    pub steps: usize,
    /// Steps simulated, up to and including ruin.
    pub steps_run: usize,
    pub initial_price: f64,
    pub final_price: f64,
    pub min_price: f64,
    pub max_price: f64,
    pub initial_wealth: f64,
    pub terminal_wealth: f64,
    pub total_fees: f64,
    pub total_trade_costs: f64,
    pub total_gas: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    /// `100 · (Y_T - Y_0) / Y_0`.
    pub terminal_profit_pct: f64,
    /// Mean fee income per step as a percentage of `Y_0`.
    pub fees_per_step_pct: f64,
    pub reallocations_per_step: f64,
    pub reallocation_count: usize,
    pub ruin_step: Option<usize>,
    /// Profit of holding the initial 50/50 split instead.
    pub hold_profit_pct: f64,
    pub summary: TrajectorySummary,
}

impl BacktestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

fn pct(value: f64, base: f64) -> f64 {
    100.0 * value / base
}

fn hold_profit_pct(dataset: &PoolDataset, initial_wealth: f64) -> Result<f64> {
    let rows = dataset.rows();
    let p0 = rows[0].price;
    let initial = Reserves::new(initial_wealth / (2.0 * p0), initial_wealth / 2.0);
    let last = SqrtPrice::from_price(rows[rows.len() - 1].price)?;
    Ok(pct(hold_value(&initial, last) - initial_wealth, initial_wealth))
}

fn price_range(dataset: &PoolDataset) -> (f64, f64) {
    dataset
        .rows()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.price), hi.max(r.price)))
}

fn check_inputs(dataset: &PoolDataset, initial_wealth: f64) -> Result<()> {
    if dataset.steps() == 0 {
        return Err(Error::data("a backtest needs at least two snapshots"));
    }
    if !(initial_wealth.is_finite() && initial_wealth > 0.0) {
        return Err(Error::param(format!(
            "initial wealth must be positive, got {initial_wealth}"
        )));
    }
    Ok(())
}

/// Builds a report from a finished run over `dataset`.
pub fn report_for_run(dataset: &PoolDataset, run: &StrategyRun) -> Result<BacktestReport> {
    let steps = dataset.steps();
    let w0 = run.initial_wealth;
    let denom = run.ruin_step.unwrap_or(steps) as f64;
    let count = run.reallocation_count();
    let total_fees = run.total_fees();
    let (min_price, max_price) = price_range(dataset);
    let rows = dataset.rows();
    Ok(BacktestReport {
        terminal_profit_pct: pct(run.terminal_wealth - w0, w0),
        fees_per_step_pct: pct(total_fees / denom, w0),
        reallocations_per_step: count as f64 / denom,
        reallocation_count: count,
        ruin_step: run.ruin_step,
        hold_profit_pct: hold_profit_pct(dataset, w0)?,
        summary: TrajectorySummary {
            steps,
            steps_run: run.steps_run(),
            initial_price: rows[0].price,
            final_price: rows[rows.len() - 1].price,
            min_price,
            max_price,
            initial_wealth: w0,
            terminal_wealth: run.terminal_wealth,
            total_fees,
            total_trade_costs: run.steps.iter().map(|r| r.events.trade_cost_paid).sum(),
            total_gas: run.steps.iter().map(|r| r.events.gas_paid).sum(),
        },
    })
}

/// Runs the strategy over the dataset's price path with its realized fee
/// rates.
pub fn run_backtest(
    dataset: &PoolDataset,
    params: &StrategyParams,
    initial_wealth: f64,
) -> Result<BacktestReport> {
    check_inputs(dataset, initial_wealth)?;
    let path = dataset.price_path()?;
    let fees = fee_rate_series(dataset);
    let run = run_strategy(&path, FeeRates::PerStep(fees.rates()), params, initial_wealth)?;
    report_for_run(dataset, &run)
}

/// Unbounded position: `L = Y_0 / (2 π_0)` worth `2 L π` at any price,
/// earning the full fee rate every step and never reallocating.
pub fn full_range_baseline(dataset: &PoolDataset, initial_wealth: f64) -> Result<BacktestReport> {
    check_inputs(dataset, initial_wealth)?;
    let path = dataset.price_path()?;
    let prices = path.sqrt_prices();
    let liquidity = initial_wealth / (2.0 * prices[0].value());
    let total_fees: f64 = fee_rate_series(dataset).rates().iter().map(|f| f * liquidity).sum();
    let terminal = 2.0 * liquidity * path.last().value() + total_fees;
    let steps = dataset.steps();
    let (min_price, max_price) = price_range(dataset);
    let rows = dataset.rows();
    Ok(BacktestReport {
        terminal_profit_pct: pct(terminal - initial_wealth, initial_wealth),
        fees_per_step_pct: pct(total_fees / steps as f64, initial_wealth),
        reallocations_per_step: 0.0,
        reallocation_count: 0,
        ruin_step: None,
        hold_profit_pct: hold_profit_pct(dataset, initial_wealth)?,
        summary: TrajectorySummary {
            steps,
            steps_run: steps,
            initial_price: rows[0].price,
            final_price: rows[rows.len() - 1].price,
            min_price,
            max_price,
            initial_wealth,
            terminal_wealth: terminal,
            total_fees,
            total_trade_costs: 0.0,
            total_gas: 0.0,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub gamma: f64,
    /// `None` when the parameters are invalid for this dataset, e.g. a
    /// negative γ large enough to make the trigger bounds cross.
    pub report: Option<BacktestReport>,
    pub error: Option<String>,
}

/// Cross product of α and γ values, γ-major: all α for the first γ, then
/// the next γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

pub const SWEEP_CSV_HEADER: &str =
    "alpha,gamma,profit_pct,fees_per_step,reallocs_per_step,realloc_count";

impl SweepResult {
    pub fn cell(&self, alpha_index: usize, gamma_index: usize) -> &SweepCell {
        &self.cells[gamma_index * self.alphas.len() + alpha_index]
    }

    /// Cell with the highest terminal profit; ties keep grid order.
    pub fn best(&self) -> Option<&SweepCell> {
        let mut best: Option<&SweepCell> = None;
        for cell in &self.cells {
            let Some(r) = &cell.report else { continue };
            let better = match best.and_then(|b| b.report.as_ref()) {
                None => true,
                Some(b) => r.terminal_profit_pct > b.terminal_profit_pct,
            };
            if better {
                best = Some(cell);
            }
        }
        best
    }

    /// One row per cell in grid order. `fees_per_step` is a percentage of
    /// initial wealth. Invalid cells carry `NaN` in every result column.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.cells.len() + 1));
        out.push_str(SWEEP_CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            match &c.report {
                Some(r) => writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.alpha,
                    c.gamma,
                    r.terminal_profit_pct,
                    r.fees_per_step_pct,
                    r.reallocations_per_step,
                    r.reallocation_count
                ),
                None => writeln!(out, "{},{},NaN,NaN,NaN,NaN", c.alpha, c.gamma),
            }
            .expect("writing to a String");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Backtests every `(α, γ)` pair. Cells run in parallel; results come back
/// in grid order. `params.alpha` and `params.gamma` are ignored.
pub fn sweep_grid(
    dataset: &PoolDataset,
    alphas: &[f64],
    gammas: &[f64],
    params: &StrategyParams,
    initial_wealth: f64,
) -> Result<SweepResult> {
    if alphas.is_empty() || gammas.is_empty() {
        return Err(Error::param("sweep grids must be nonempty"));
    }
    check_inputs(dataset, initial_wealth)?;
    let path = dataset.price_path()?;
    let fees = fee_rate_series(dataset);
    let pairs: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| alphas.iter().map(move |&a| (a, g)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(alpha, gamma)| {
            let p = params.with_alpha(alpha).with_gamma(gamma);
            let outcome = run_strategy(&path, FeeRates::PerStep(fees.rates()), &p, initial_wealth)
                .and_then(|run| report_for_run(dataset, &run));
            match outcome {
                Ok(report) => Ok(SweepCell {
                    alpha,
                    gamma,
                    report: Some(report),
                    error: None,
                }),
                Err(Error::InvalidParameter(msg)) => Ok(SweepCell {
                    alpha,
                    gamma,
                    report: None,
                    error: Some(msg),
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        alphas: alphas.to_vec(),
        gammas: gammas.to_vec(),
        cells,
    })
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,price,lower_price,upper_price,liquidity,x,y,\
unclaimed_fees,wealth,side,active_fraction,fees_accrued,trade_cost,gas";

/// Per-step state of a run over `path` as CSV; prices are marginal prices.
pub fn trajectory_csv(run: &StrategyRun, path: &PricePath) -> String {
    let mut out = String::new();
    out.push_str(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    let init = &run.initial;
    let iv = init.position.interval;
    writeln!(
        out,
        "0,{},{},{},{},{},{},0,{},inside,1,0,0,0",
        path.initial().price(),
        iv.lower().price(),
        iv.upper().price(),
        init.position.liquidity,
        init.holdings.x,
        init.holdings.y,
        run.initial_wealth
    )
    .expect("writing to a String");
    for rec in &run.steps {
        let st = &rec.state;
        let ev = &rec.events;
        let side = match ev.side {
            Side::Below => "below",
            Side::Inside => "inside",
            Side::Above => "above",
        };
        let iv = st.position.interval;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            rec.t,
            rec.price.price(),
            iv.lower().price(),
            iv.upper().price(),
            st.position.liquidity,
            st.holdings.x,
            st.holdings.y,
            st.unclaimed_fees,
            st.wealth(rec.price),
            if st.ruined { "ruined" } else { side },
            ev.active_fraction,
            ev.fees_accrued,
            ev.trade_cost_paid,
            ev.gas_paid
        )
        .expect("writing to a String");
    }
    out
}
