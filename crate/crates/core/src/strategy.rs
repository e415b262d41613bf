//! Discrete-time liquidity-provision state machine.
//!
//! At every step the engine accrues fees on the position held over the
//! previous step, checks whether the new price leaves the (possibly
//! γ-shifted) interval, and if so closes the position, claims the fees,
//! rebalances the proceeds into the 1:1 value split, pays the trading fee on
//! the rebalanced volume plus one gas charge, and reopens a symmetric position
//! centered at the current price.
//!
//! The last step of a run never reallocates: terminal wealth is the
//! position marked to market at `π_T` plus unclaimed fees.

use serde::{Deserialize, Serialize};

use crate::amm::{
    active_fraction, concentration_factor, liquidity_for_symmetric, reserves_for, Position,
    PriceInterval, Reserves, SqrtPrice,
};
use crate::error::{Error, Result};
use crate::stochastic::PricePath;

/// Strategy parameters shared by every step of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    /// Interval half-width ratio: positions span `[π/α, απ]`.
    pub alpha: f64,
    /// Additive sqrt-price threshold. Positive values delay reallocation,
    /// negative values advance it.
    pub gamma: f64,
    /// Lump cost per reallocation, in `y` units.
    pub gas_cost: f64,
    /// Fee paid per unit of traded volume when rebalancing.
    pub trade_fee: f64,
}

impl StrategyParams {
    pub fn new(alpha: f64, gamma: f64, gas_cost: f64, trade_fee: f64) -> Result<Self> {
        let params = StrategyParams {
            alpha,
            gamma,
            gas_cost,
            trade_fee,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return Err(Error::param(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        if !self.gamma.is_finite() {
            return Err(Error::param("gamma must be finite"));
        }
        if !(self.gas_cost.is_finite() && self.gas_cost >= 0.0) {
            return Err(Error::param(format!(
                "gas cost must be nonnegative, got {}",
                self.gas_cost
            )));
        }
        if !(self.trade_fee.is_finite() && (0.0..1.0).contains(&self.trade_fee)) {
            return Err(Error::param(format!(
                "trade fee must lie in [0, 1), got {}",
                self.trade_fee
            )));
        }
        Ok(())
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        StrategyParams { alpha, ..self }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        StrategyParams { gamma, ..self }
    }
}

/// Which side of the interval a step resolved to. `Inside` means no
/// reallocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Inside,
    Above,
}

/// LP state after a step's accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpState {
    pub position: Position,
    /// Token holdings backing the position at the step's price.
    pub holdings: Reserves,
    /// Fees earned but not yet claimed. Zero right after a reallocation.
    pub unclaimed_fees: f64,
    pub reallocated_last_step: bool,
    pub ruined: bool,
}

impl LpState {
    /// Opens the initial position from a balanced deposit. No costs are
    /// charged.
    pub fn open(initial_wealth: f64, price: SqrtPrice, alpha: f64) -> Result<Self> {
        if !(initial_wealth.is_finite() && initial_wealth > 0.0) {
            return Err(Error::param(format!(
                "initial wealth must be positive, got {initial_wealth}"
            )));
        }
        let (position, holdings) = liquidity_for_symmetric(initial_wealth, price, alpha)?;
        Ok(LpState {
            position,
            holdings,
            unclaimed_fees: 0.0,
            reallocated_last_step: false,
            ruined: false,
        })
    }

    /// Holdings plus unclaimed fees, marked at `price`.
    pub fn wealth(&self, price: SqrtPrice) -> f64 {
        if self.ruined {
            0.0
        } else {
            self.holdings.value_at(price) + self.unclaimed_fees
        }
    }

    fn ruined_from(self) -> Self {
        LpState {
            position: Position {
                liquidity: 0.0,
                interval: self.position.interval,
            },
            holdings: Reserves::EMPTY,
            unclaimed_fees: 0.0,
            reallocated_last_step: false,
            ruined: true,
        }
    }
}

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvents {
    /// Trigger side; anything but `Inside` means the position was reallocated
    /// (or ruin was hit while trying).
    pub side: Side,
    /// Share of the step the old position was active.
    pub active_fraction: f64,
    /// Fees per unit of liquidity actually earned this step.
    pub fee_rate_earned: f64,
    /// `fee_rate_earned * L_{t-1}`.
    pub fees_accrued: f64,
    /// Fees accumulated since the last claim, including this step's accrual.
    pub accumulated_fees: f64,
    pub trade_cost_paid: f64,
    pub gas_paid: f64,
    /// Reserves of the old position at the step's price.
    pub withdrawn: Reserves,
}

impl StepEvents {
    pub fn reallocated(&self) -> bool {
        self.side != Side::Inside
    }
}

/// Reallocation trigger.
///
/// Fires below when `π ≤ lower - γ` and above when `π ≥ upper + γ`. With
/// `γ = 0` a price on either bound already triggers.
pub fn should_reallocate(price: SqrtPrice, interval: &PriceInterval, gamma: f64) -> Result<Side> {
    let lo = interval.lower().value() - gamma;
    let hi = interval.upper().value() + gamma;
    if lo >= hi {
        return Err(Error::param(format!(
            "gamma {gamma} makes the effective trigger bounds cross ({lo} >= {hi})"
        )));
    }
    let p = price.value();
    Ok(if p <= lo {
        Side::Below
    } else if p >= hi {
        Side::Above
    } else {
        Side::Inside
    })
}

/// Result of converting withdrawn tokens and fees into a balanced split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rebalance {
    Balanced {
        holdings: Reserves,
        /// Trading fee paid on `|y - ỹ|`.
        trade_cost: f64,
    },
    /// Costs exhausted the available wealth.
    Ruined,
}

/// Rebalances `withdrawn` plus claimed fees into holdings with `y = π² x`.
///
/// Solves `2y = V - c_tr |y - ỹ|` with `V = π² x̃ + ỹ + Σf - c_g`; the left
/// side minus the right is strictly increasing in `y`, so the root is unique
/// and found by checking which side of `ỹ` it falls on.
pub fn rebalance_holdings(
    withdrawn: Reserves,
    unclaimed_fees: f64,
    price: SqrtPrice,
    trade_fee: f64,
    gas_cost: f64,
) -> Rebalance {
    let value = withdrawn.value_at(price) + unclaimed_fees - gas_cost;
    let y0 = withdrawn.y;
    let y = if value >= 2.0 * y0 {
        (value + trade_fee * y0) / (2.0 + trade_fee)
    } else {
        (value - trade_fee * y0) / (2.0 - trade_fee)
    };
    if !(value > 0.0 && y > 0.0) {
        return Rebalance::Ruined;
    }
    Rebalance::Balanced {
        holdings: Reserves::new(y / price.price(), y),
        trade_cost: trade_fee * (y - y0).abs(),
    }
}

/// Advances the state by one step from `prev_price` to `price`.
pub fn step(
    state: &LpState,
    prev_price: SqrtPrice,
    price: SqrtPrice,
    fee_rate_step: f64,
    params: &StrategyParams,
) -> Result<(LpState, StepEvents)> {
    advance(state, prev_price, price, fee_rate_step, params, true)
}

/// Final step of a run: accrues fees and marks to market, never reallocates.
pub fn settle_step(
    state: &LpState,
    prev_price: SqrtPrice,
    price: SqrtPrice,
    fee_rate_step: f64,
    params: &StrategyParams,
) -> Result<(LpState, StepEvents)> {
    advance(state, prev_price, price, fee_rate_step, params, false)
}

fn advance(
    state: &LpState,
    prev_price: SqrtPrice,
    price: SqrtPrice,
    fee_rate_step: f64,
    params: &StrategyParams,
    may_reallocate: bool,
) -> Result<(LpState, StepEvents)> {
    if state.ruined {
        return Err(Error::param("cannot step a ruined state"));
    }
    if !(fee_rate_step.is_finite() && fee_rate_step >= 0.0) {
        return Err(Error::param(format!(
            "fee rate must be nonnegative, got {fee_rate_step}"
        )));
    }
    let old = state.position;

    let fraction = active_fraction(prev_price, price, &old.interval);
    let fee_rate_earned = fraction * fee_rate_step;
    let fees_accrued = fee_rate_earned * old.liquidity;
    let accumulated_fees = state.unclaimed_fees + fees_accrued;

    let side = if may_reallocate {
        should_reallocate(price, &old.interval, params.gamma)?
    } else {
        Side::Inside
    };
    let withdrawn = reserves_for(&old, price);

    let mut events = StepEvents {
        side,
        active_fraction: fraction,
        fee_rate_earned,
        fees_accrued,
        accumulated_fees,
        trade_cost_paid: 0.0,
        gas_paid: 0.0,
        withdrawn,
    };

    if side == Side::Inside {
        let next = LpState {
            position: old,
            holdings: withdrawn,
            unclaimed_fees: accumulated_fees,
            reallocated_last_step: false,
            ruined: false,
        };
        return Ok((next, events));
    }

    match rebalance_holdings(
        withdrawn,
        accumulated_fees,
        price,
        params.trade_fee,
        params.gas_cost,
    ) {
        Rebalance::Ruined => Ok((state.ruined_from(), events)),
        Rebalance::Balanced {
            holdings,
            trade_cost,
        } => {
            events.trade_cost_paid = trade_cost;
            events.gas_paid = params.gas_cost;
            let interval = PriceInterval::symmetric(price, params.alpha)?;
            let liquidity = concentration_factor(params.alpha) * holdings.y / price.value();
            let next = LpState {
                position: Position { liquidity, interval },
                holdings,
                unclaimed_fees: 0.0,
                reallocated_last_step: true,
                ruined: false,
            };
            Ok((next, events))
        }
    }
}

/// Per-step fee income per unit of liquidity for a fully active position.
#[derive(Debug, Clone, Copy)]
pub enum FeeRates<'a> {
    Constant(f64),
    /// One entry per step `t = 1 … T`.
    PerStep(&'a [f64]),
}

impl FeeRates<'_> {
    /// Rate for step `t` (1-based).
    pub fn at(&self, t: usize) -> f64 {
        match self {
            FeeRates::Constant(f) => *f,
            FeeRates::PerStep(rates) => rates[t - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub price: SqrtPrice,
    pub state: LpState,
    pub events: StepEvents,
}

/// Outcome of running a strategy over one price path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub initial_wealth: f64,
    /// `Y_T`, zero after ruin.
    pub terminal_wealth: f64,
    pub initial: LpState,
    /// Records for `t = 1 …`, truncated at the ruin step if ruin occurred.
    pub steps: Vec<StepRecord>,
    pub ruin_step: Option<usize>,
}

impl StrategyRun {
    /// Completed reallocations.
    pub fn reallocation_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|r| r.events.reallocated() && !r.state.ruined)
            .count()
    }

    pub fn total_fees(&self) -> f64 {
        self.steps.iter().map(|r| r.events.fees_accrued).sum()
    }

    pub fn total_costs(&self) -> f64 {
        self.steps
            .iter()
            .map(|r| r.events.trade_cost_paid + r.events.gas_paid)
            .sum()
    }

    /// Steps actually simulated (up to and including ruin).
    pub fn steps_run(&self) -> usize {
        self.steps.len()
    }
}

/// Runs the strategy over `path` starting from `initial_wealth` in balanced
/// holdings.
pub fn run_strategy(
    path: &PricePath,
    fee_rates: FeeRates<'_>,
    params: &StrategyParams,
    initial_wealth: f64,
) -> Result<StrategyRun> {
    params.validate()?;
    let prices = path.sqrt_prices();
    let horizon = path.horizon();
    if let FeeRates::PerStep(rates) = fee_rates {
        if rates.len() != horizon {
            return Err(Error::param(format!(
                "expected {horizon} per-step fee rates, got {}",
                rates.len()
            )));
        }
    }
    let initial = LpState::open(initial_wealth, prices[0], params.alpha)?;

    let mut state = initial;
    let mut steps = Vec::with_capacity(horizon);
    let mut ruin_step = None;
    for t in 1..=horizon {
        let fee = fee_rates.at(t);
        let (next, events) = if t < horizon {
            step(&state, prices[t - 1], prices[t], fee, params)?
        } else {
            settle_step(&state, prices[t - 1], prices[t], fee, params)?
        };
        steps.push(StepRecord {
            t,
            price: prices[t],
            state: next,
            events,
        });
        state = next;
        if next.ruined {
            ruin_step = Some(t);
            break;
        }
    }

    let terminal_wealth = if ruin_step.is_some() {
        0.0
    } else {
        state.wealth(path.last())
    };
    Ok(StrategyRun {
        initial_wealth,
        terminal_wealth,
        initial,
        steps,
        ruin_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amm::position_value;

    fn sp(v: f64) -> SqrtPrice {
        SqrtPrice::new(v).unwrap()
    }

    fn iv(lo: f64, hi: f64) -> PriceInterval {
        PriceInterval::new(sp(lo), sp(hi)).unwrap()
    }

    fn params(alpha: f64, gamma: f64, gas: f64, fee: f64) -> StrategyParams {
        StrategyParams::new(alpha, gamma, gas, fee).unwrap()
    }

    #[test]
    fn trigger_examples() {
        assert_eq!(should_reallocate(sp(5.0), &iv(1.0, 3.0), 0.0).unwrap(), Side::Above);
        for g in [0.0, 0.3, 2.0] {
            assert_eq!(should_reallocate(sp(2.0), &iv(1.0, 3.0), g).unwrap(), Side::Inside);
        }
        assert_eq!(should_reallocate(sp(3.4), &iv(1.0, 3.0), 0.5).unwrap(), Side::Inside);
        assert_eq!(should_reallocate(sp(3.4), &iv(1.0, 3.0), 0.2).unwrap(), Side::Above);
        assert_eq!(should_reallocate(sp(0.5), &iv(1.0, 3.0), 0.0).unwrap(), Side::Below);
        assert_eq!(should_reallocate(sp(0.5), &iv(1.0, 3.0), 0.6).unwrap(), Side::Inside);
    }

    #[test]
    fn trigger_fires_on_bounds_with_zero_gamma() {
        assert_eq!(should_reallocate(sp(1.0), &iv(1.0, 3.0), 0.0).unwrap(), Side::Below);
        assert_eq!(should_reallocate(sp(3.0), &iv(1.0, 3.0), 0.0).unwrap(), Side::Above);
    }

    #[test]
    fn negative_gamma_advances_trigger() {
        assert_eq!(should_reallocate(sp(2.8), &iv(1.0, 3.0), -0.3).unwrap(), Side::Above);
        assert_eq!(should_reallocate(sp(1.2), &iv(1.0, 3.0), -0.3).unwrap(), Side::Below);
    }

    #[test]
    fn crossing_effective_bounds_is_rejected() {
        assert!(matches!(
            should_reallocate(sp(2.0), &iv(1.0, 3.0), -1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(should_reallocate(sp(2.0), &iv(1.0, 3.0), -1.5).is_err());
    }

    #[test]
    fn rebalance_without_trade_fee_splits_in_half() {
        let price = sp(2.0);
        match rebalance_holdings(Reserves::new(0.0, 12.0), 0.0, price, 0.0, 2.0) {
            Rebalance::Balanced { holdings, trade_cost } => {
                assert_eq!(holdings.y, 5.0);
                assert_eq!(holdings.x, 5.0 / 4.0);
                assert_eq!(trade_cost, 0.0);
            }
            Rebalance::Ruined => panic!("unexpected ruin"),
        }
    }

    #[test]
    fn rebalance_with_trade_fee() {
        let price = sp(3.0);
        match rebalance_holdings(Reserves::new(0.0, 12.0), 0.0, price, 0.0005, 2.0) {
            Rebalance::Balanced { holdings, trade_cost } => {
                let expected = (10.0 - 0.006) / 1.9995;
                assert!((holdings.y - expected).abs() < 1e-12);
                assert!((holdings.y - 4.99825).abs() < 1e-5);
                // the equation it solves
                let lhs = 2.0 * holdings.y;
                let rhs = 10.0 - 0.0005 * (holdings.y - 12.0).abs();
                assert!((lhs - rhs).abs() < 1e-12);
                assert!((trade_cost - 0.0005 * (12.0 - holdings.y)).abs() < 1e-15);
            }
            Rebalance::Ruined => panic!("unexpected ruin"),
        }
    }

    #[test]
    fn rebalance_buying_y_branch() {
        // all x: must sell x for y, y grows above ỹ = 0
        let price = sp(2.0);
        match rebalance_holdings(Reserves::new(3.0, 0.0), 0.0, price, 0.01, 0.0) {
            Rebalance::Balanced { holdings, .. } => {
                let expected = 12.0 / 2.01;
                assert!((holdings.y - expected).abs() < 1e-12);
                let lhs = 2.0 * holdings.y;
                let rhs = 12.0 - 0.01 * holdings.y;
                assert!((lhs - rhs).abs() < 1e-12);
            }
            Rebalance::Ruined => panic!("unexpected ruin"),
        }
    }

    #[test]
    fn rebalance_fixed_point_has_no_volume() {
        let price = sp(2.0);
        match rebalance_holdings(Reserves::new(1.25, 5.0), 0.0, price, 0.003, 0.0) {
            Rebalance::Balanced { holdings, trade_cost } => {
                assert!((holdings.y - 5.0).abs() < 1e-12);
                assert!((holdings.x - 1.25).abs() < 1e-12);
                assert!(trade_cost < 1e-15);
            }
            Rebalance::Ruined => panic!("unexpected ruin"),
        }
    }

    #[test]
    fn rebalance_ruin() {
        let price = sp(2.0);
        assert_eq!(
            rebalance_holdings(Reserves::new(0.0, 10.0), 0.0, price, 0.0, 10.0),
            Rebalance::Ruined
        );
        assert_eq!(
            rebalance_holdings(Reserves::new(0.0, 10.0), 1.0, price, 0.0, 50.0),
            Rebalance::Ruined
        );
    }

    #[test]
    fn inside_step_accrues_and_revalues() {
        let p = params(2.0, 0.0, 5.0, 0.0005);
        let s0 = LpState::open(12.0, sp(2.0), 2.0).unwrap();
        let (s1, ev) = step(&s0, sp(2.0), sp(2.5), 0.1, &p).unwrap();
        assert_eq!(ev.side, Side::Inside);
        assert_eq!(s1.position, s0.position);
        assert!((s1.unclaimed_fees - 0.1 * 6.0).abs() < 1e-15);
        assert_eq!(s1.holdings, reserves_for(&s0.position, sp(2.5)));
        assert_eq!(ev.gas_paid, 0.0);
    }

    #[test]
    fn constant_price_only_grows_fees() {
        let p = params(1.5, 0.0, 100.0, 0.0005);
        let mut s = LpState::open(1000.0, sp(3.0), 1.5).unwrap();
        let l = s.position.liquidity;
        for k in 1..=20 {
            let (n, ev) = step(&s, sp(3.0), sp(3.0), 0.01, &p).unwrap();
            assert_eq!(ev.side, Side::Inside);
            assert_eq!(n.position, s.position);
            assert!((n.unclaimed_fees - k as f64 * 0.01 * l).abs() < 1e-9);
            s = n;
        }
    }

    #[test]
    fn costless_reallocation_is_value_neutral() {
        let p = params(1.2, 0.0, 0.0, 0.0);
        let s0 = LpState::open(1000.0, sp(3.0), 1.2).unwrap();
        let exit = sp(3.0 * 1.3);
        let before = position_value(&s0.position, exit, 0.0);
        let (s1, ev) = step(&s0, sp(3.0), exit, 0.0, &p).unwrap();
        assert_eq!(ev.side, Side::Above);
        let after = position_value(&s1.position, exit, s1.unclaimed_fees);
        assert!(((after - before) / before).abs() < 1e-12);
        assert!((s1.holdings.y - exit.price() * s1.holdings.x).abs() < 1e-9 * s1.holdings.y);
        let iv = s1.position.interval;
        assert!((iv.lower().value() - exit.value() / 1.2).abs() < 1e-12);
        assert!((iv.upper().value() - exit.value() * 1.2).abs() < 1e-12);
    }

    #[test]
    fn reallocation_claims_fees_and_charges_costs() {
        let p = params(1.1, 0.0, 3.0, 0.001);
        let s0 = LpState::open(1000.0, sp(3.0), 1.1).unwrap();
        let exit = sp(3.5);
        let (s1, ev) = step(&s0, sp(3.0), exit, 0.5, &p).unwrap();
        assert_eq!(ev.side, Side::Above);
        assert!(ev.fees_accrued > 0.0 && ev.active_fraction < 1.0);
        assert_eq!(s1.unclaimed_fees, 0.0);
        assert_eq!(ev.gas_paid, 3.0);
        assert!(s1.reallocated_last_step);
        let pre = ev.withdrawn.value_at(exit) + ev.accumulated_fees;
        let post = s1.holdings.value_at(exit);
        assert!((pre - post - ev.gas_paid - ev.trade_cost_paid).abs() < 1e-9);
    }

    #[test]
    fn ruin_zeroes_state() {
        let p = params(1.01, 0.0, 1e6, 0.0);
        let s0 = LpState::open(1000.0, sp(3.0), 1.01).unwrap();
        let (s1, ev) = step(&s0, sp(3.0), sp(3.5), 0.0, &p).unwrap();
        assert!(ev.reallocated());
        assert!(s1.ruined);
        assert_eq!(s1.wealth(sp(3.5)), 0.0);
        assert!(step(&s1, sp(3.5), sp(3.5), 0.0, &p).is_err());
    }

    #[test]
    fn settle_step_never_reallocates() {
        let p = params(1.1, 0.0, 0.0, 0.0);
        let s0 = LpState::open(1000.0, sp(3.0), 1.1).unwrap();
        let (s1, ev) = settle_step(&s0, sp(3.0), sp(9.0), 0.0, &p).unwrap();
        assert_eq!(ev.side, Side::Inside);
        assert_eq!(s1.position, s0.position);
    }

    #[test]
    fn constant_path_runs() {
        let path = PricePath::from_sqrt_values(&[4.0; 6]).unwrap();
        let p = params(1.5, 0.0, 50.0, 0.0005);
        let run = run_strategy(&path, FeeRates::Constant(0.0), &p, 1000.0).unwrap();
        assert!((run.terminal_wealth - 1000.0).abs() < 1e-9);
        assert_eq!(run.reallocation_count(), 0);

        let f = 0.02;
        let run = run_strategy(&path, FeeRates::Constant(f), &p, 1000.0).unwrap();
        let l0 = run.initial.position.liquidity;
        assert!((run.terminal_wealth - (1000.0 + 5.0 * f * l0)).abs() < 1e-9);
    }

    #[test]
    fn wide_interval_never_reallocates() {
        let p0 = 9.0;
        let vals: Vec<f64> = (0..50)
            .map(|i| p0 * (1.0 + 0.5 * ((i as f64) * 0.7).sin()))
            .collect();
        let path = PricePath::from_sqrt_values(&vals).unwrap();
        let (lo, hi) = path.min_max();
        assert!(lo.value() > p0 / 4.0 && hi.value() < p0 * 4.0);
        let run = run_strategy(&path, FeeRates::Constant(0.01), &params(4.0, 0.0, 100.0, 0.0005), 1e5)
            .unwrap();
        assert_eq!(run.reallocation_count(), 0);
    }

    #[test]
    fn run_rejects_bad_inputs() {
        let path = PricePath::from_sqrt_values(&[4.0, 4.1]).unwrap();
        let p = params(1.5, 0.0, 0.0, 0.0);
        assert!(run_strategy(&path, FeeRates::Constant(0.0), &p, 0.0).is_err());
        assert!(run_strategy(&path, FeeRates::Constant(0.0), &p, -5.0).is_err());
        assert!(run_strategy(&path, FeeRates::PerStep(&[0.1, 0.2]), &p, 1.0).is_err());
        assert!(run_strategy(&path, FeeRates::Constant(-1.0), &p, 1.0).is_err());
        assert!(StrategyParams::new(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(StrategyParams::new(2.0, 0.0, -1.0, 0.0).is_err());
        assert!(StrategyParams::new(2.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn ruin_truncates_run() {
        let vals: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 10.0 } else { 10.5 }).collect();
        let path = PricePath::from_sqrt_values(&vals).unwrap();
        let p = params(1.0001, 0.0, 300.0, 0.0005);
        let run = run_strategy(&path, FeeRates::Constant(0.0), &p, 1000.0).unwrap();
        let t = run.ruin_step.expect("should be ruined");
        assert_eq!(run.steps.len(), t);
        assert_eq!(run.terminal_wealth, 0.0);
        assert!(t <= 5);
    }
}
