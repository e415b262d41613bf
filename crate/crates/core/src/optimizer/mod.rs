//! Choosing the interval width α by sample average approximation.
//!
//! For a fixed α and a fixed price path the strategy is deterministic, so
//! the SAA objective (mean terminal wealth over sampled paths) is a scalar
//! function of α that simulation evaluates exactly. It is piecewise smooth
//! with jumps wherever the number of reallocations on some path changes,
//! hence a global grid followed by a local golden-section refinement.

mod export;
mod feasibility;
mod model;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::{sample_gbm_paths, GbmParams, PricePath};
use crate::strategy::{run_strategy, FeeRates, StrategyParams};

pub use export::{engine_assignment, export_minlp, required_big_m, TRIGGER_EPSILON};
pub use feasibility::{check_feasibility, ConstraintId, FeasibilityReport, Violation};
pub use model::{ModelDocument, ModelHeader, Sense, Term, VarDecl, VarKind};
pub use model::Constraint as ModelConstraint;

pub const DEFAULT_ALPHA_BOUNDS: (f64, f64) = (1.01, 4.0);
pub const DEFAULT_GRID_STEP: f64 = 0.01;
pub const DEFAULT_REFINE_TOLERANCE: f64 = 1e-4;

/// Relative margin by which a candidate must beat the incumbent. Equal
/// objectives keep the smaller α.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaaConfig {
    /// Price model the scenarios are drawn from.
    pub model: GbmParams,
    pub num_paths: usize,
    pub horizon: usize,
    pub seed: u64,
    pub alpha_bounds: (f64, f64),
    pub grid_step: f64,
    pub refine_tolerance: f64,
}

impl SaaConfig {
    pub fn new(model: GbmParams, num_paths: usize, horizon: usize, seed: u64) -> Self {
        SaaConfig {
            model,
            num_paths,
            horizon,
            seed,
            alpha_bounds: DEFAULT_ALPHA_BOUNDS,
            grid_step: DEFAULT_GRID_STEP,
            refine_tolerance: DEFAULT_REFINE_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.alpha_bounds;
        if !(lo.is_finite() && hi.is_finite() && 1.0 < lo && lo < hi) {
            return Err(Error::param(format!(
                "alpha bounds must satisfy 1 < low < high, got ({lo}, {hi})"
            )));
        }
        if !(self.grid_step.is_finite() && self.grid_step > 0.0) {
            return Err(Error::param(format!("grid step must be positive, got {}", self.grid_step)));
        }
        if !(self.refine_tolerance.is_finite() && self.refine_tolerance > 0.0) {
            return Err(Error::param(format!(
                "refine tolerance must be positive, got {}",
                self.refine_tolerance
            )));
        }
        if self.num_paths == 0 || self.horizon == 0 {
            return Err(Error::param("number of paths and horizon must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SaaConfig { seed, ..self }
    }

    pub fn sample_paths(&self) -> Result<Vec<PricePath>> {
        sample_gbm_paths(&self.model, self.num_paths, self.horizon, self.seed)
    }

    /// Grid `low, low + step, …`, closed with `high` itself.
    pub fn grid(&self) -> Vec<f64> {
        alpha_grid(self.alpha_bounds.0, self.alpha_bounds.1, self.grid_step)
    }
}

/// Evenly spaced points from `low` up to and including `high`. Points are
/// computed as `low + i·step` to avoid drift.
pub fn alpha_grid(low: f64, high: f64, step: f64) -> Vec<f64> {
    let n = ((high - low) / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| low + i as f64 * step).collect();
    if high - grid[n] > 1e-9 * step {
        grid.push(high);
    } else {
        grid[n] = high;
    }
    grid
}

/// Mean terminal wealth over `paths` at the given α.
pub fn saa_objective(
    alpha: f64,
    paths: &[PricePath],
    fee_rates: FeeRates<'_>,
    params: &StrategyParams,
    initial_wealth: f64,
) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::param("SAA objective needs at least one path"));
    }
    let params = params.with_alpha(alpha);
    let mut total = 0.0;
    for path in paths {
        total += run_strategy(path, fee_rates, &params, initial_wealth)?.terminal_wealth;
    }
    Ok(total / paths.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub alpha_star: f64,
    /// Mean terminal wealth at `alpha_star`.
    pub objective_value: f64,
    /// Best grid point before refinement.
    pub grid_alpha: f64,
    pub grid_objective: f64,
    pub evaluations: usize,
    pub seed: u64,
    pub wall_time_secs: f64,
}

/// Maximizes the SAA objective over `config.alpha_bounds` for paths sampled
/// from `config`. `params.alpha` is ignored.
pub fn optimize_alpha(
    config: &SaaConfig,
    fee_rates: FeeRates<'_>,
    params: &StrategyParams,
    initial_wealth: f64,
) -> Result<OptimizationResult> {
    config.validate()?;
    let start = Instant::now();
    let paths = config.sample_paths()?;
    let mut result = optimize_alpha_on(&paths, config, fee_rates, params, initial_wealth)?;
    result.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Same search over caller-supplied scenarios.
pub fn optimize_alpha_on(
    paths: &[PricePath],
    config: &SaaConfig,
    fee_rates: FeeRates<'_>,
    params: &StrategyParams,
    initial_wealth: f64,
) -> Result<OptimizationResult> {
    config.validate()?;
    params.with_alpha(config.alpha_bounds.1).validate()?;
    let start = Instant::now();
    let objective = |alpha: f64| saa_objective(alpha, paths, fee_rates, params, initial_wealth);

    let grid = config.grid();
    let values = grid
        .par_iter()
        .map(|&a| objective(a))
        .collect::<Result<Vec<f64>>>()?;
    let (mut best_alpha, mut best_value) = (grid[0], values[0]);
    for (&a, &v) in grid.iter().zip(&values).skip(1) {
        if beats(v, best_value) {
            best_alpha = a;
            best_value = v;
        }
    }
    let (grid_alpha, grid_objective) = (best_alpha, best_value);

    let (lo, hi) = config.alpha_bounds;
    let bracket = (
        (grid_alpha - config.grid_step).max(lo),
        (grid_alpha + config.grid_step).min(hi),
    );
    let (refined_alpha, refined_value, refine_evals) =
        golden_section_max(&objective, bracket, config.refine_tolerance)?;
    if beats(refined_value, best_value) {
        best_alpha = refined_alpha;
        best_value = refined_value;
    }

    Ok(OptimizationResult {
        alpha_star: best_alpha,
        objective_value: best_value,
        grid_alpha,
        grid_objective,
        evaluations: grid.len() + refine_evals,
        seed: config.seed,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn beats(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + TIE_TOLERANCE * incumbent.abs().max(1.0)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum inside `(a, b)`. Returns the best
/// point probed, the objective there and the number of evaluations.
fn golden_section_max(
    f: &impl Fn(f64) -> Result<f64>,
    (mut a, mut b): (f64, f64),
    tolerance: f64,
) -> Result<(f64, f64, usize)> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evals = 2;
    let (mut best_x, mut best_f) = if fd > fc { (d, fd) } else { (c, fc) };
    while b - a > tolerance {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            if fc > best_f || (fc == best_f && c < best_x) {
                best_x = c;
                best_f = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            if fd > best_f {
                best_x = d;
                best_f = fd;
            }
        }
        evals += 1;
    }
    Ok((best_x, best_f, evals))
}

/// Mean, median, extremes and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub std_dev: f64,
}

impl SummaryStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("cannot summarize an empty sample"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 {
            sorted[m / 2]
        } else {
            (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0
        };
        let std_dev = if m > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(SummaryStats {
            mean,
            median,
            min: sorted[0],
            max: sorted[m - 1],
            std_dev,
        })
    }
}

/// Optimization repeated over consecutive seeds `seed, seed + 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedOptimization {
    pub runs: Vec<OptimizationResult>,
    pub alpha_stats: SummaryStats,
    pub runtime_stats: SummaryStats,
}

pub fn optimize_alpha_repeated(
    config: &SaaConfig,
    repeats: usize,
    fee_rates: FeeRates<'_>,
    params: &StrategyParams,
    initial_wealth: f64,
) -> Result<RepeatedOptimization> {
    if repeats == 0 {
        return Err(Error::param("repeats must be at least 1"));
    }
    let runs = (0..repeats as u64)
        .map(|i| {
            optimize_alpha(
                &config.with_seed(config.seed.wrapping_add(i)),
                fee_rates,
                params,
                initial_wealth,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let alphas: Vec<f64> = runs.iter().map(|r| r.alpha_star).collect();
    let times: Vec<f64> = runs.iter().map(|r| r.wall_time_secs).collect();
    Ok(RepeatedOptimization {
        alpha_stats: SummaryStats::of(&alphas)?,
        runtime_stats: SummaryStats::of(&times)?,
        runs,
    })
}
