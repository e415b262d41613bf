//! Checks an engine trajectory against the algebraic formulation of the
//! strategy: case indicators, interval and liquidity updates, withdrawn
//! reserves, the rebalancing identities, fee interpolation and fee
//! accumulation. This is an independent re-statement of the dynamics, so a
//! passing check means the simulator and the optimization model agree.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::PricePath;
use crate::strategy::{FeeRates, Side, StrategyParams, StrategyRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintId {
    /// Case indicators match the price's position relative to the interval.
    Trigger,
    IntervalLower,
    IntervalUpper,
    WithdrawX,
    WithdrawY,
    RebalanceValue,
    RebalanceBalance,
    CarryX,
    CarryY,
    Liquidity,
    FeeInterpolation,
    FeeAccumulation,
    Sign,
    /// Record `t`, price or initial state disagrees with the path.
    Alignment,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        write!(f, "{}", s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub t: usize,
    /// Relative residual `|lhs - rhs| / max(1, |lhs|, |rhs|)`.
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "constraint {} violated at t = {} (residual {:e})",
            self.constraint, self.t, self.residual
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub steps_checked: usize,
    pub max_residual: f64,
    pub violation: Option<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violation.is_none()
    }
}

fn residual(lhs: f64, rhs: f64) -> f64 {
    let scale = 1f64.max(lhs.abs()).max(rhs.abs());
    let r = (lhs - rhs).abs() / scale;
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}

struct Checker {
    tolerance: f64,
    max_residual: f64,
}

impl Checker {
    fn eq(&mut self, id: ConstraintId, t: usize, lhs: f64, rhs: f64) -> std::result::Result<(), Violation> {
        let r = residual(lhs, rhs);
        self.max_residual = self.max_residual.max(r);
        if r > self.tolerance {
            Err(Violation {
                constraint: id,
                t,
                residual: r,
            })
        } else {
            Ok(())
        }
    }

    fn nonneg(&mut self, t: usize, values: &[f64]) -> std::result::Result<(), Violation> {
        for &v in values {
            if v.is_nan() || v < -self.tolerance * v.abs().max(1.0) {
                return Err(Violation {
                    constraint: ConstraintId::Sign,
                    t,
                    residual: if v.is_nan() { f64::INFINITY } else { -v },
                });
            }
        }
        Ok(())
    }
}

/// Formulation variables at one time index.
#[derive(Clone, Copy)]
struct Vars {
    lower: f64,
    upper: f64,
    liquidity: f64,
    accumulated: f64,
    reallocated: bool,
}

/// Verifies `run` against the formulation for `path`. Requires `γ = 0`,
/// since the interpolated fee formula assumes every step starts inside the
/// current interval.
///
/// Steps up to the end of the run are checked. At a ruin step only the
/// constraints preceding the rebalance are checked: the formulation has no
/// nonnegative solution past that point.
pub fn check_feasibility(
    run: &StrategyRun,
    path: &PricePath,
    fee_rates: FeeRates<'_>,
    params: &StrategyParams,
    tolerance: f64,
) -> Result<FeasibilityReport> {
    params.validate()?;
    if params.gamma != 0.0 {
        return Err(Error::param(
            "feasibility checking requires a zero trigger threshold (gamma = 0)",
        ));
    }
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(Error::param(format!("tolerance must be nonnegative, got {tolerance}")));
    }
    let mut checker = Checker {
        tolerance,
        max_residual: 0.0,
    };
    let violation = check_steps(&mut checker, run, path, fee_rates, params).err();
    Ok(FeasibilityReport {
        steps_checked: run.steps.len(),
        max_residual: checker.max_residual,
        violation,
    })
}

fn check_steps(
    c: &mut Checker,
    run: &StrategyRun,
    path: &PricePath,
    fee_rates: FeeRates<'_>,
    params: &StrategyParams,
) -> std::result::Result<(), Violation> {
    use ConstraintId::*;

    let prices = path.sqrt_prices();
    let horizon = path.horizon();
    let alpha = params.alpha;
    let misaligned = |t| Violation {
        constraint: Alignment,
        t,
        residual: f64::INFINITY,
    };
    if run.steps.len() > horizon {
        return Err(misaligned(horizon + 1));
    }

    let p0 = prices[0].value();
    let init = &run.initial;
    c.eq(IntervalLower, 0, init.position.interval.lower().value(), p0 / alpha)?;
    c.eq(IntervalUpper, 0, init.position.interval.upper().value(), alpha * p0)?;
    c.eq(RebalanceBalance, 0, init.holdings.y, p0 * p0 * init.holdings.x)?;
    c.eq(
        Liquidity,
        0,
        init.position.liquidity,
        alpha / (alpha - 1.0) * init.holdings.y / p0,
    )?;
    let mut prev = Vars {
        lower: init.position.interval.lower().value(),
        upper: init.position.interval.upper().value(),
        liquidity: init.position.liquidity,
        accumulated: 0.0,
        reallocated: false,
    };

    for (i, rec) in run.steps.iter().enumerate() {
        let t = i + 1;
        if rec.t != t || rec.price != prices[t] {
            return Err(misaligned(t));
        }
        let p = prices[t].value();
        let p_prev = prices[t - 1].value();
        let ev = &rec.events;
        let st = &rec.state;

        // case indicators; the last step never reallocates but its case
        // still selects the withdrawal and fee formulas
        let below = p <= prev.lower;
        let above = p >= prev.upper;
        let middle = !below && !above;
        let z = (below || above) && t < horizon;
        let engine_z = ev.side != Side::Inside;
        let side_ok = match ev.side {
            Side::Below => below,
            Side::Above => above,
            Side::Inside => !z,
        };
        if !side_ok || engine_z != z {
            // indicator mismatch
            return Err(Violation {
                constraint: Trigger,
                t,
                residual: 1.0,
            });
        }

        let (lower, upper, liquidity) = if st.ruined {
            (prev.lower, prev.upper, prev.liquidity)
        } else {
            (
                st.position.interval.lower().value(),
                st.position.interval.upper().value(),
                st.position.liquidity,
            )
        };
        if !st.ruined {
            let (l_rhs, u_rhs) = if z {
                (p / alpha, alpha * p)
            } else {
                (prev.lower, prev.upper)
            };
            c.eq(IntervalLower, t, lower, l_rhs)?;
            c.eq(IntervalUpper, t, upper, u_rhs)?;
        }

        let l = prev.liquidity;
        let (xw, yw) = (ev.withdrawn.x, ev.withdrawn.y);
        let (xw_rhs, yw_rhs) = if below {
            (l * (1.0 / prev.lower - 1.0 / prev.upper), 0.0)
        } else if middle {
            (l * (1.0 / p - 1.0 / prev.upper), l * (p - prev.lower))
        } else {
            (0.0, l * (prev.upper - prev.lower))
        };
        c.eq(WithdrawX, t, xw, xw_rhs)?;
        c.eq(WithdrawY, t, yw, yw_rhs)?;

        let fee_bar = fee_rates.at(t);
        let (sq, sq_prev) = (p * p, p_prev * p_prev);
        let cf_rhs = if below {
            (sq_prev - prev.lower * prev.lower) / (sq_prev - sq) * fee_bar
        } else if middle {
            fee_bar
        } else {
            (prev.upper * prev.upper - sq_prev) / (sq - sq_prev) * fee_bar
        };
        c.eq(FeeInterpolation, t, ev.fee_rate_earned, cf_rhs)?;

        let carried = if prev.reallocated { 0.0 } else { prev.accumulated };
        let acc = ev.accumulated_fees;
        c.eq(FeeAccumulation, t, acc, carried + ev.fee_rate_earned * l)?;

        if st.ruined {
            c.nonneg(t, &[xw, yw, ev.fee_rate_earned, acc])?;
            break;
        }

        let (x, y) = (st.holdings.x, st.holdings.y);
        if z {
            c.eq(
                RebalanceValue,
                t,
                sq * x + y,
                sq * xw + yw - params.trade_fee * (y - yw).abs() - params.gas_cost + acc,
            )?;
            c.eq(RebalanceBalance, t, y, sq * x)?;
            c.eq(Liquidity, t, liquidity, alpha / (alpha - 1.0) * y / p)?;
        } else {
            c.eq(CarryX, t, x, xw)?;
            c.eq(CarryY, t, y, yw)?;
            c.eq(Liquidity, t, liquidity, prev.liquidity)?;
        }
        c.nonneg(t, &[lower, upper, xw, yw, x, y, liquidity, ev.fee_rate_earned, acc])?;

        prev = Vars {
            lower,
            upper,
            liquidity,
            accumulated: acc,
            reallocated: z,
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::{sample_gbm_path, GbmParams};
    use crate::strategy::run_strategy;

    fn params(alpha: f64) -> StrategyParams {
        StrategyParams::new(alpha, 0.0, 109.8, 0.0005).unwrap()
    }

    fn volatile_path() -> PricePath {
        PricePath::from_marginal_prices(&[1350.0, 1400.0, 1300.0, 1380.0, 1320.0, 1450.0, 1340.0])
            .unwrap()
    }

    #[test]
    fn engine_trajectories_pass() {
        let path = volatile_path();
        for alpha in [1.005, 1.01, 1.02, 1.05, 2.0] {
            let p = params(alpha);
            let run = run_strategy(&path, FeeRates::Constant(1.6e-4), &p, 1e5).unwrap();
            let rep = check_feasibility(&run, &path, FeeRates::Constant(1.6e-4), &p, 1e-9).unwrap();
            assert!(rep.is_feasible(), "alpha {alpha}: {:?}", rep.violation);
            assert_eq!(rep.steps_checked, 6);
        }
    }

    #[test]
    fn random_gbm_trajectories_pass() {
        let model = GbmParams::new(0.02, 1350.0).unwrap();
        for i in 0..50u64 {
            let path = sample_gbm_path(&model, 10, 99, i);
            let p = params(1.005 + 0.01 * i as f64);
            let run = run_strategy(&path, FeeRates::Constant(2e-4), &p, 1e5).unwrap();
            let rep = check_feasibility(&run, &path, FeeRates::Constant(2e-4), &p, 1e-9).unwrap();
            assert!(rep.is_feasible(), "path {i}: {:?}", rep.violation);
        }
    }

    #[test]
    fn perturbed_fee_accumulation_is_caught() {
        let path = volatile_path();
        let p = params(1.02);
        let mut run = run_strategy(&path, FeeRates::Constant(1.6e-4), &p, 1e5).unwrap();
        run.steps[2].events.accumulated_fees += 1.0;
        let v = check_feasibility(&run, &path, FeeRates::Constant(1.6e-4), &p, 1e-9)
            .unwrap()
            .violation
            .unwrap();
        assert_eq!(v.constraint, ConstraintId::FeeAccumulation);
        assert_eq!(v.t, 3);
    }

    #[test]
    fn stale_interval_is_caught() {
        let path = volatile_path();
        let p = params(1.02);
        let mut run = run_strategy(&path, FeeRates::Constant(1.6e-4), &p, 1e5).unwrap();
        let t = run
            .steps
            .iter()
            .position(|r| r.events.reallocated())
            .expect("path triggers a reallocation");
        let old = if t == 0 {
            run.initial.position.interval
        } else {
            run.steps[t - 1].state.position.interval
        };
        run.steps[t].state.position.interval = old;
        let v = check_feasibility(&run, &path, FeeRates::Constant(1.6e-4), &p, 1e-9)
            .unwrap()
            .violation
            .unwrap();
        assert_eq!(v.constraint, ConstraintId::IntervalLower);
        assert_eq!(v.t, t + 1);
    }

    #[test]
    fn other_injections() {
        let path = volatile_path();
        let p = params(1.02);
        let base = run_strategy(&path, FeeRates::Constant(1.6e-4), &p, 1e5).unwrap();
        let check = |run: &StrategyRun| {
            check_feasibility(run, &path, FeeRates::Constant(1.6e-4), &p, 1e-9)
                .unwrap()
                .violation
                .map(|v| v.constraint)
        };

        let mut run = base.clone();
        run.steps[0].events.withdrawn.y *= 1.01;
        assert_eq!(check(&run), Some(ConstraintId::WithdrawY));

        let mut run = base.clone();
        run.steps[0].events.fee_rate_earned *= 2.0;
        assert_eq!(check(&run), Some(ConstraintId::FeeInterpolation));

        let mut run = base.clone();
        let t = run.steps.iter().position(|r| r.events.reallocated()).unwrap();
        run.steps[t].state.holdings.y *= 1.001;
        assert_eq!(check(&run), Some(ConstraintId::RebalanceValue));

        let mut run = base.clone();
        let t = run.steps.iter().position(|r| r.events.reallocated()).unwrap();
        run.steps[t].events.side = Side::Inside;
        assert_eq!(check(&run), Some(ConstraintId::Trigger));

        let mut run = base;
        let t = run.steps.iter().position(|r| !r.events.reallocated()).unwrap();
        run.steps[t].state.position.liquidity *= 1.5;
        assert_eq!(check(&run), Some(ConstraintId::Liquidity));
    }

    #[test]
    fn rejects_nonzero_gamma() {
        let path = volatile_path();
        let p = StrategyParams::new(1.02, 0.1, 0.0, 0.0).unwrap();
        let run = run_strategy(&path, FeeRates::Constant(0.0), &p, 1e5).unwrap();
        assert!(check_feasibility(&run, &path, FeeRates::Constant(0.0), &p, 1e-9).is_err());
    }

    #[test]
    fn ruined_run_checked_up_to_ruin() {
        let path = PricePath::from_marginal_prices(&[1.0, 1.5, 0.7, 1.5, 0.7]).unwrap();
        let p = StrategyParams::new(1.0001, 0.0, 0.6, 0.0005).unwrap();
        let run = run_strategy(&path, FeeRates::Constant(0.0), &p, 1.0).unwrap();
        assert!(run.ruin_step.is_some());
        let rep = check_feasibility(&run, &path, FeeRates::Constant(0.0), &p, 1e-9).unwrap();
        assert!(rep.is_feasible(), "{:?}", rep.violation);
    }
}
