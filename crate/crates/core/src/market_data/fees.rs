use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::PoolDataset;
use crate::error::{Error, Result};

/// 2^128 as a float; exact.
const Q128: f64 = 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

/// Which snapshot's price converts the `x`-denominated fee delta of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeePricing {
    StartOfStep,
    #[default]
    EndOfStep,
}

/// Per-step fee income per unit of liquidity for an always-active position,
/// in `y` units. Entry `t - 1` covers the step from snapshot `t - 1` to `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeeRateSeries(Vec<f64>);

impl FeeRateSeries {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some((i, r)) = rates
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r >= 0.0))
        {
            return Err(Error::data(format!("fee rate {i} must be nonnegative, got {r}")));
        }
        Ok(FeeRateSeries(rates))
    }

    pub fn rates(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Converts an X128 fixed-point quantity to a float.
pub fn decode_x128(raw: &BigUint) -> f64 {
    raw.to_f64().unwrap_or(f64::INFINITY) / Q128
}

/// Factor turning a decoded counter delta (raw units of one token per raw
/// unit of liquidity) into whole tokens per unit of liquidity as the
/// strategy engine measures it.
///
/// Raw liquidity is `sqrt(raw_x * raw_y)`, so one whole-token unit of
/// liquidity equals `10^((dx + dy) / 2)` raw units. Token amounts shrink by
/// `10^-d` of their own decimals.
pub fn liquidity_unit_scale(token_decimals: u32, decimals_x: u32, decimals_y: u32) -> f64 {
    let exponent = (decimals_x + decimals_y) as f64 / 2.0 - token_decimals as f64;
    10f64.powf(exponent)
}

/// Realized fee rate per step: `Δf_y + price · Δf_x`.
pub fn fee_rate_series(dataset: &PoolDataset) -> FeeRateSeries {
    fee_rate_series_with(dataset, FeePricing::EndOfStep)
}

pub fn fee_rate_series_with(dataset: &PoolDataset, pricing: FeePricing) -> FeeRateSeries {
    let meta = dataset.meta();
    let scale_x = liquidity_unit_scale(meta.decimals_x, meta.decimals_x, meta.decimals_y);
    let scale_y = liquidity_unit_scale(meta.decimals_y, meta.decimals_x, meta.decimals_y);
    let rates = dataset
        .rows()
        .windows(2)
        .map(|w| {
            let d0 = decode_x128(&(&w[1].fee_growth_0 - &w[0].fee_growth_0));
            let d1 = decode_x128(&(&w[1].fee_growth_1 - &w[0].fee_growth_1));
            let (dx, dy) = if meta.x_token == 0 { (d0, d1) } else { (d1, d0) };
            let price = match pricing {
                FeePricing::StartOfStep => w[0].price,
                FeePricing::EndOfStep => w[1].price,
            };
            dy * scale_y + price * dx * scale_x
        })
        .collect();
    FeeRateSeries(rates)
}

/// Exact median; the mean of the two middle entries for even lengths.
pub fn median_fee_rate(series: &FeeRateSeries) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::data("cannot take the median of an empty fee series"));
    }
    let mut v = series.0.clone();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::super::{PoolMeta, PoolRow};
    use super::*;
    use proptest::prelude::*;

    fn q128() -> BigUint {
        BigUint::from(1u8) << 128
    }

    fn unit_meta(x_token: u8) -> PoolMeta {
        PoolMeta {
            x_token,
            decimals_x: 0,
            decimals_y: 0,
            fee_tier: 0.0005,
        }
    }

    fn two_rows(p1: f64, f0: BigUint, f1: BigUint, meta: PoolMeta) -> PoolDataset {
        PoolDataset::new(
            vec![
                PoolRow {
                    timestamp: 0,
                    price: 1.0,
                    fee_growth_0: BigUint::default(),
                    fee_growth_1: BigUint::default(),
                },
                PoolRow {
                    timestamp: 3600,
                    price: p1,
                    fee_growth_0: f0,
                    fee_growth_1: f1,
                },
            ],
            meta,
        )
        .unwrap()
    }

    #[test]
    fn x128_identity() {
        assert_eq!(decode_x128(&q128()), 1.0);
        assert_eq!(decode_x128(&(q128() * 3u8)), 3.0);
        assert_eq!(decode_x128(&BigUint::default()), 0.0);
    }

    #[test]
    fn y_counter_identity_scaling() {
        // x is token 1, so token 0 carries y
        let ds = two_rows(7.0, q128(), BigUint::default(), unit_meta(1));
        assert_eq!(fee_rate_series(&ds).rates(), &[1.0]);
    }

    #[test]
    fn x_counter_converted_at_price() {
        let ds = two_rows(1350.0, BigUint::default(), q128(), unit_meta(1));
        assert_eq!(fee_rate_series(&ds).rates(), &[1350.0]);
        let ds = two_rows(1350.0, q128(), BigUint::default(), unit_meta(0));
        assert_eq!(fee_rate_series(&ds).rates(), &[1350.0]);
        assert_eq!(
            fee_rate_series_with(&ds, FeePricing::StartOfStep).rates(),
            &[1.0]
        );
    }

    #[test]
    fn zero_deltas() {
        let ds = two_rows(2.0, BigUint::default(), BigUint::default(), unit_meta(1));
        assert_eq!(fee_rate_series(&ds).rates(), &[0.0]);
    }

    #[test]
    fn decimals_scaling() {
        // USDC (6) as y, WETH (18) as x: one raw USDC per raw liquidity is
        // 10^-6 USDC per 10^-12 whole liquidity units.
        assert_eq!(liquidity_unit_scale(6, 18, 6), 1e6);
        assert_eq!(liquidity_unit_scale(18, 18, 6), 1e-6);
        assert_eq!(liquidity_unit_scale(0, 0, 0), 1.0);
    }

    #[test]
    fn median_examples() {
        let s = |v: &[f64]| FeeRateSeries::new(v.to_vec()).unwrap();
        assert_eq!(median_fee_rate(&s(&[1.0, 2.0, 100.0])).unwrap(), 2.0);
        assert_eq!(median_fee_rate(&s(&[5.0])).unwrap(), 5.0);
        assert_eq!(median_fee_rate(&s(&[1.0, 3.0])).unwrap(), 2.0);
        assert_eq!(median_fee_rate(&s(&[100.0, 1.0, 2.0])).unwrap(), 2.0);
        assert!(median_fee_rate(&s(&[])).is_err());
        assert!(FeeRateSeries::new(vec![-1.0]).is_err());
    }

    proptest! {
        #[test]
        fn decode_is_linear_in_counters(
            deltas in prop::collection::vec((0u64..u64::MAX / 4, 0u64..u64::MAX / 4), 1..20),
            k in 1u64..1000,
            price in 1.0f64..5000.0,
        ) {
            let mut f0 = BigUint::default();
            let mut f1 = BigUint::default();
            let mut rows = Vec::new();
            for (i, (a, b)) in deltas.iter().enumerate() {
                rows.push(PoolRow {
                    timestamp: i as i64 * 3600,
                    price: price * (1.0 + i as f64 * 0.01),
                    fee_growth_0: f0.clone() << 70,
                    fee_growth_1: f1.clone() << 90,
                });
                f0 += *a;
                f1 += *b;
            }
            let ds = PoolDataset::new(rows, PoolMeta::default()).unwrap();
            let base = fee_rate_series(&ds);
            let scaled = fee_rate_series(&ds.with_scaled_counters(k));
            for (a, b) in base.rates().iter().zip(scaled.rates()) {
                let expect = a * k as f64;
                prop_assert!((b - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
            }
        }
    }
}
