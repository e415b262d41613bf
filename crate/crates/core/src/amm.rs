//! Constant-product concentrated-liquidity math.
//!
//! Prices are carried as square roots of the marginal exchange rate
//! (token `y` per token `x`), so interval bounds and reserve formulas stay
//! linear in the price variable. Token `y` is the numéraire: every value
//! returned here is denominated in `y` units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square root of the marginal exchange rate `y / x`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SqrtPrice(f64);

impl SqrtPrice {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && (value * value).is_finite() {
            Ok(SqrtPrice(value))
        } else {
            Err(Error::param(format!("sqrt price must be positive and finite, got {value}")))
        }
    }

    /// Builds a sqrt price from a marginal price `y / x`.
    pub fn from_price(price: f64) -> Result<Self> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::param(format!("price must be positive and finite, got {price}")));
        }
        Self::new(price.sqrt())
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// The marginal price, `value²`.
    #[inline]
    pub fn price(self) -> f64 {
        self.0 * self.0
    }
}

/// Liquidity provision bounds `[lower, upper]` in sqrt-price space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceInterval {
    lower: SqrtPrice,
    upper: SqrtPrice,
}

impl PriceInterval {
    pub fn new(lower: SqrtPrice, upper: SqrtPrice) -> Result<Self> {
        if lower.value() < upper.value() {
            Ok(PriceInterval { lower, upper })
        } else {
            Err(Error::param(format!(
                "interval lower bound {} must be below upper bound {}",
                lower.value(),
                upper.value()
            )))
        }
    }

    /// The interval `[center / alpha, alpha * center]`.
    pub fn symmetric(center: SqrtPrice, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::param(format!("alpha must exceed 1, got {alpha}")));
        }
        let lower = SqrtPrice::new(center.value() / alpha)?;
        let upper = SqrtPrice::new(center.value() * alpha)?;
        PriceInterval::new(lower, upper)
    }

    #[inline]
    pub fn lower(&self) -> SqrtPrice {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> SqrtPrice {
        self.upper
    }

    /// Closed-interval membership.
    pub fn contains(&self, price: SqrtPrice) -> bool {
        self.lower.value() <= price.value() && price.value() <= self.upper.value()
    }

    /// Open-interval membership.
    pub fn contains_strictly(&self, price: SqrtPrice) -> bool {
        self.lower.value() < price.value() && price.value() < self.upper.value()
    }
}

/// Real token holdings.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Reserves {
    pub x: f64,
    pub y: f64,
}

impl Reserves {
    pub const EMPTY: Reserves = Reserves { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Reserves { x, y }
    }

    /// Mark-to-market value in `y` units.
    pub fn value_at(&self, price: SqrtPrice) -> f64 {
        price.price() * self.x + self.y
    }
}

/// A liquidity position `(L, [lower, upper])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub liquidity: f64,
    pub interval: PriceInterval,
}

impl Position {
    pub fn new(liquidity: f64, interval: PriceInterval) -> Result<Self> {
        if liquidity.is_finite() && liquidity >= 0.0 {
            Ok(Position { liquidity, interval })
        } else {
            Err(Error::param(format!("liquidity must be nonnegative, got {liquidity}")))
        }
    }
}

/// Where a price sits relative to an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Below,
    Inside,
    Above,
}

/// Classifies `price` against the closed interval.
pub fn region_of(price: SqrtPrice, interval: &PriceInterval) -> Region {
    if price.value() < interval.lower.value() {
        Region::Below
    } else if price.value() > interval.upper.value() {
        Region::Above
    } else {
        Region::Inside
    }
}

/// Real reserves backing `position` at `price`.
///
/// Below the interval the position is all `x`, above it all `y`; inside
/// it both formulas meet the outer cases continuously at the bounds.
pub fn reserves_for(position: &Position, price: SqrtPrice) -> Reserves {
    let l = position.liquidity;
    let lo = position.interval.lower.value();
    let hi = position.interval.upper.value();
    match region_of(price, &position.interval) {
        Region::Below => Reserves::new(l * (1.0 / lo - 1.0 / hi), 0.0),
        Region::Inside => {
            let p = price.value();
            Reserves::new(l * (1.0 / p - 1.0 / hi), l * (p - lo))
        }
        Region::Above => Reserves::new(0.0, l * (hi - lo)),
    }
}

/// Opens a position on `[price / alpha, alpha * price]` from a balanced
/// deposit worth `holdings_value`, half in each token.
///
/// Returns the position and the deposited reserves.
pub fn liquidity_for_symmetric(
    holdings_value: f64,
    price: SqrtPrice,
    alpha: f64,
) -> Result<(Position, Reserves)> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(Error::param(format!("alpha must exceed 1, got {alpha}")));
    }
    if !(holdings_value.is_finite() && holdings_value >= 0.0) {
        return Err(Error::param(format!(
            "holdings value must be nonnegative, got {holdings_value}"
        )));
    }
    let interval = PriceInterval::symmetric(price, alpha)?;
    let y = holdings_value / 2.0;
    let x = y / price.price();
    let liquidity = concentration_factor(alpha) * y / price.value();
    Ok((Position { liquidity, interval }, Reserves::new(x, y)))
}

/// `alpha / (alpha - 1)`: liquidity per unit of `y / π` on a symmetric interval.
#[inline]
pub fn concentration_factor(alpha: f64) -> f64 {
    alpha / (alpha - 1.0)
}

/// Fraction of the step from `prev_price` to `price` spent inside `interval`.
///
/// The path between observations is taken to be linear in the marginal
/// price (squared sqrt price). For a step that starts inside the interval
/// this reduces to 1 when the end point is inside and to the exit
/// interpolation otherwise; a step that starts and ends outside on the same
/// side is inactive. A zero-length step outside the interval returns 0.
pub fn active_fraction(prev_price: SqrtPrice, price: SqrtPrice, interval: &PriceInterval) -> f64 {
    let a = prev_price.price();
    let b = price.price();
    let lo = interval.lower.price();
    let hi = interval.upper.price();
    if a == b {
        return if lo <= a && a <= hi { 1.0 } else { 0.0 };
    }
    if interval.contains(prev_price) && interval.contains(price) {
        return 1.0;
    }
    let (from, to) = if a < b { (a, b) } else { (b, a) };
    let overlap = to.min(hi) - from.max(lo);
    (overlap / (to - from)).clamp(0.0, 1.0)
}

/// `π² x + y + unclaimed_fees` for the reserves of `position` at `price`.
pub fn position_value(position: &Position, price: SqrtPrice, unclaimed_fees: f64) -> f64 {
    reserves_for(position, price).value_at(price) + unclaimed_fees
}

/// Value of simply holding `initial` at `price`.
pub fn hold_value(initial: &Reserves, price: SqrtPrice) -> f64 {
    initial.value_at(price)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(v: f64) -> SqrtPrice {
        SqrtPrice::new(v).unwrap()
    }

    fn pos(l: f64, lo: f64, hi: f64) -> Position {
        Position::new(l, PriceInterval::new(sp(lo), sp(hi)).unwrap()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn reserves_three_cases() {
        let p = pos(6.0, 1.0, 3.0);
        assert_eq!(reserves_for(&p, sp(2.0)), Reserves::new(1.0, 6.0));
        assert_eq!(reserves_for(&p, sp(0.5)), Reserves::new(4.0, 0.0));
        assert_eq!(reserves_for(&p, sp(5.0)), Reserves::new(0.0, 12.0));
    }

    #[test]
    fn reserves_at_bounds_match_outer_cases() {
        let p = pos(6.0, 1.0, 3.0);
        assert_eq!(reserves_for(&p, sp(1.0)), Reserves::new(4.0, 0.0));
        assert_eq!(reserves_for(&p, sp(3.0)), Reserves::new(0.0, 12.0));
    }

    #[test]
    fn invalid_types_rejected() {
        assert!(SqrtPrice::new(0.0).is_err());
        assert!(SqrtPrice::new(-1.0).is_err());
        assert!(SqrtPrice::new(f64::NAN).is_err());
        assert!(PriceInterval::new(sp(2.0), sp(2.0)).is_err());
        assert!(PriceInterval::new(sp(3.0), sp(2.0)).is_err());
        assert!(Position::new(-1.0, PriceInterval::new(sp(1.0), sp(2.0)).unwrap()).is_err());
    }

    #[test]
    fn symmetric_deposit_example() {
        let (p, r) = liquidity_for_symmetric(12.0, sp(2.0), 2.0).unwrap();
        assert_eq!(p.interval.lower().value(), 1.0);
        assert_eq!(p.interval.upper().value(), 4.0);
        assert_eq!(p.liquidity, 6.0);
        assert_eq!(r, Reserves::new(1.5, 6.0));
        let back = reserves_for(&p, sp(2.0));
        assert_eq!(back, r);
        assert_eq!(r.y, 4.0 * r.x);
    }

    #[test]
    fn symmetric_deposit_wide_limit_is_full_range() {
        let v = 1000.0;
        let price = sp(7.0);
        let (p, _) = liquidity_for_symmetric(v, price, 1e9).unwrap();
        assert!(rel(p.liquidity, v / (2.0 * price.value())) < 1e-8);
    }

    #[test]
    fn symmetric_deposit_zero_and_bad_alpha() {
        let (p, r) = liquidity_for_symmetric(0.0, sp(3.0), 1.5).unwrap();
        assert_eq!(p.liquidity, 0.0);
        assert_eq!(r, Reserves::EMPTY);
        assert!(matches!(
            liquidity_for_symmetric(10.0, sp(3.0), 1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(liquidity_for_symmetric(10.0, sp(3.0), 0.5).is_err());
    }

    #[test]
    fn active_fraction_examples() {
        let iv = PriceInterval::new(sp(1.0), sp(5f64.sqrt())).unwrap();
        // 4 -> 6 in marginal price, upper bound 5
        assert!((active_fraction(sp(2.0), sp(6f64.sqrt()), &iv) - 0.5).abs() < 1e-12);
        let iv = PriceInterval::new(sp(3f64.sqrt()), sp(10.0)).unwrap();
        // 4 -> 2, lower bound 3
        assert!((active_fraction(sp(2.0), sp(2f64.sqrt()), &iv) - 0.5).abs() < 1e-12);
        let iv = PriceInterval::new(sp(1.0), sp(3.0)).unwrap();
        assert_eq!(active_fraction(sp(2.0), sp(2.5), &iv), 1.0);
        assert_eq!(active_fraction(sp(2.0), sp(2.0), &iv), 1.0);
    }

    #[test]
    fn active_fraction_degenerate_outside() {
        let iv = PriceInterval::new(sp(1.0), sp(3.0)).unwrap();
        assert_eq!(active_fraction(sp(5.0), sp(5.0), &iv), 0.0);
        assert_eq!(active_fraction(sp(4.0), sp(5.0), &iv), 0.0);
        assert_eq!(active_fraction(sp(0.5), sp(0.7), &iv), 0.0);
    }

    #[test]
    fn active_fraction_crossing_whole_interval() {
        // marginal 0.25 -> 16 crossing [1, 9]
        let iv = PriceInterval::new(sp(1.0), sp(3.0)).unwrap();
        let f = active_fraction(sp(0.5), sp(4.0), &iv);
        assert!((f - 8.0 / 15.75).abs() < 1e-12);
    }

    #[test]
    fn position_value_examples() {
        let p = pos(6.0, 1.0, 3.0);
        assert_eq!(position_value(&p, sp(2.0), 0.0), 10.0);
        assert_eq!(position_value(&p, sp(5.0), 1.0), 13.0);
        let empty = pos(0.0, 1.0, 3.0);
        assert_eq!(position_value(&empty, sp(0.3), 7.0), 7.0);
    }

    #[test]
    fn hold_value_examples() {
        let price = SqrtPrice::from_price(1350.0).unwrap();
        assert!(rel(hold_value(&Reserves::new(1.0, 1350.0), price), 2700.0) < 1e-15);
        assert_eq!(hold_value(&Reserves::new(0.0, 42.0), sp(9.0)), 42.0);
        let (_, r) = liquidity_for_symmetric(500.0, sp(3.0), 1.3).unwrap();
        assert!(rel(hold_value(&r, sp(3.0)), 500.0) < 1e-15);
    }

    #[test]
    fn position_value_flat_above_upper() {
        let p = pos(6.0, 1.0, 3.0);
        let a = position_value(&p, sp(3.5), 0.0);
        let b = position_value(&p, sp(50.0), 0.0);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn continuity_at_bounds(
            l in 1e-3f64..1e6,
            lo in 1e-2f64..1e3,
            width in 1.001f64..10.0,
            sign in prop::bool::ANY,
        ) {
            let hi = lo * width;
            let p = pos(l, lo, hi);
            let d = if sign { 1e-12 } else { -1e-12 };
            let x_scale = l * (1.0 / lo - 1.0 / hi);
            let y_scale = l * (hi - lo);
            for bound in [lo, hi] {
                let at = reserves_for(&p, sp(bound));
                let near = reserves_for(&p, sp(bound * (1.0 + d)));
                prop_assert!((at.x - near.x).abs() / x_scale <= 1e-9);
                prop_assert!((at.y - near.y).abs() / y_scale <= 1e-9);
            }
        }

        #[test]
        fn deposit_round_trip_and_balance(
            v in 1e-3f64..1e9,
            price in 1e-3f64..1e4,
            alpha in 1.001f64..100.0,
        ) {
            let price = sp(price);
            let (p, r) = liquidity_for_symmetric(v, price, alpha).unwrap();
            let back = reserves_for(&p, price);
            prop_assert!(rel(back.y, price.price() * back.x) <= 1e-12);
            prop_assert!(rel(position_value(&p, price, 0.0), v) <= 1e-12);
            prop_assert!(rel(back.x, r.x) <= 1e-12 && rel(back.y, r.y) <= 1e-12);
        }

        #[test]
        fn liquidity_decreases_with_alpha(
            v in 1.0f64..1e6,
            price in 1e-2f64..1e3,
            a in 1.001f64..20.0,
            bump in 1e-3f64..5.0,
        ) {
            let price = sp(price);
            let (p1, _) = liquidity_for_symmetric(v, price, a).unwrap();
            let (p2, _) = liquidity_for_symmetric(v, price, a + bump).unwrap();
            prop_assert!(p2.liquidity < p1.liquidity);
        }

        #[test]
        fn active_fraction_in_unit_interval(
            a in 0.1f64..10.0,
            b in 0.1f64..10.0,
            lo in 0.5f64..2.0,
            w in 1.01f64..4.0,
        ) {
            let iv = PriceInterval::new(sp(lo), sp(lo * w)).unwrap();
            let f = active_fraction(sp(a), sp(b), &iv);
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
