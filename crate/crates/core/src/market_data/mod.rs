//! Historical pool data: hourly price and fee-growth snapshots.
//!
//! Token `x` is the volatile asset and token `y` the numéraire; `price` is
//! always `y` per `x`. Fee-growth counters are kept as exact integers and
//! only converted to floating point after differencing.

mod csv_io;
mod fees;
pub mod indexer;

use std::collections::HashMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IngestError, Result};
use crate::stochastic::PricePath;

pub use csv_io::{load_pool_csv, meta_path_for, read_pool_csv, to_csv_string, write_pool_csv, CSV_HEADER};
pub use fees::{
    decode_x128, fee_rate_series, fee_rate_series_with, liquidity_unit_scale, median_fee_rate,
    FeePricing, FeeRateSeries,
};

/// Expected spacing between snapshots.
pub const HOUR_SECS: i64 = 3600;

/// Pool-level facts needed to interpret the raw counters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolMeta {
    /// Which pool token (0 or 1) plays the role of `x`.
    pub x_token: u8,
    pub decimals_x: u32,
    pub decimals_y: u32,
    /// Pool swap fee as a fraction, e.g. `0.0005`.
    pub fee_tier: f64,
}

impl Default for PoolMeta {
    /// USDC/WETH 0.05%: token0 is USDC (6 decimals), token1 is WETH (18).
    fn default() -> Self {
        PoolMeta {
            x_token: 1,
            decimals_x: 18,
            decimals_y: 6,
            fee_tier: 0.0005,
        }
    }
}

impl PoolMeta {
    pub fn validate(&self) -> Result<()> {
        if self.x_token > 1 {
            return Err(Error::param(format!("x_token must be 0 or 1, got {}", self.x_token)));
        }
        if !(self.fee_tier.is_finite() && (0.0..1.0).contains(&self.fee_tier)) {
            return Err(Error::param(format!("fee tier must lie in [0, 1), got {}", self.fee_tier)));
        }
        if self.decimals_x > 77 || self.decimals_y > 77 {
            return Err(Error::param("token decimals out of range"));
        }
        Ok(())
    }
}

/// One hourly snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRow {
    /// UNIX seconds, UTC.
    pub timestamp: i64,
    /// Marginal price, `y` per `x`.
    pub price: f64,
    /// Raw `feeGrowthGlobal0X128`.
    pub fee_growth_0: BigUint,
    /// Raw `feeGrowthGlobal1X128`.
    pub fee_growth_1: BigUint,
}

/// A missing stretch between two consecutive snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    /// Index of the row that ends the gap.
    pub index: usize,
    pub seconds: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolDataset {
    rows: Vec<PoolRow>,
    meta: PoolMeta,
}

impl PoolDataset {
    /// Sorts and validates rows. Row numbers in errors count from 2, as if
    /// the rows were lines of a CSV file below its header.
    pub fn new(rows: Vec<PoolRow>, meta: PoolMeta) -> Result<Self> {
        let numbered = rows.into_iter().enumerate().map(|(i, r)| (i + 2, r)).collect();
        Self::from_numbered(numbered, meta)
    }

    pub(crate) fn from_numbered(mut rows: Vec<(usize, PoolRow)>, meta: PoolMeta) -> Result<Self> {
        meta.validate()?;
        if rows.is_empty() {
            return Err(IngestError::Empty.into());
        }
        for (line, row) in &rows {
            if !(row.price.is_finite() && row.price > 0.0) {
                return Err(IngestError::NonPositivePrice {
                    row: *line,
                    price: row.price,
                }
                .into());
            }
        }
        let mut seen: HashMap<i64, usize> = HashMap::with_capacity(rows.len());
        for (line, row) in &rows {
            if let Some(first) = seen.insert(row.timestamp, *line) {
                return Err(IngestError::DuplicateTimestamp {
                    timestamp: row.timestamp,
                    first_row: first,
                    row: *line,
                }
                .into());
            }
        }
        rows.sort_by_key(|(_, r)| r.timestamp);
        for pair in rows.windows(2) {
            let (_, prev) = &pair[0];
            let (line, row) = &pair[1];
            if row.fee_growth_0 < prev.fee_growth_0 {
                return Err(IngestError::NonMonotoneCounter {
                    row: *line,
                    counter: "fee_growth_0_x128",
                }
                .into());
            }
            if row.fee_growth_1 < prev.fee_growth_1 {
                return Err(IngestError::NonMonotoneCounter {
                    row: *line,
                    counter: "fee_growth_1_x128",
                }
                .into());
            }
        }
        Ok(PoolDataset {
            rows: rows.into_iter().map(|(_, r)| r).collect(),
            meta,
        })
    }

    pub fn rows(&self) -> &[PoolRow] {
        &self.rows
    }

    pub fn meta(&self) -> &PoolMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of steps between the first and last snapshot.
    pub fn steps(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn marginal_prices(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.price).collect()
    }

    pub fn price_path(&self) -> Result<PricePath> {
        PricePath::from_marginal_prices(&self.marginal_prices())
    }

    /// Consecutive snapshots further apart than one hour. Each still counts
    /// as a single strategy step.
    pub fn gaps(&self) -> Vec<Gap> {
        self.rows
            .windows(2)
            .enumerate()
            .filter_map(|(i, w)| {
                let dt = w[1].timestamp - w[0].timestamp;
                (dt != HOUR_SECS).then_some(Gap {
                    index: i + 1,
                    seconds: dt,
                })
            })
            .collect()
    }

    /// The same rows with both counters multiplied by `k`.
    pub fn with_scaled_counters(&self, k: u64) -> PoolDataset {
        let rows = self
            .rows
            .iter()
            .map(|r| PoolRow {
                fee_growth_0: &r.fee_growth_0 * k,
                fee_growth_1: &r.fee_growth_1 * k,
                ..r.clone()
            })
            .collect();
        PoolDataset {
            rows,
            meta: self.meta,
        }
    }
}
