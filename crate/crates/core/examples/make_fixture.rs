//! Regenerates the bundled synthetic USDC/WETH hourly dataset.
//!
//! ```text
//! cargo run -p lpconc --example make_fixture -- crates/core/tests/fixtures/usdc_weth_hourly.csv
//! ```
//!
//! Prices follow a seeded GBM with hourly σ = 0.006 from 1350. Fee income
//! per unit of liquidity has a lognormal base level around 1.6e-4 USDC per
//! step with spikes on large moves, split between the two tokens by trade
//! direction and encoded as X128 counters with real token decimals.

use lpconc::market_data::{write_pool_csv, PoolDataset, PoolMeta, PoolRow};
use lpconc::stochastic::{sample_gbm_path, GbmParams};
use num_bigint::BigUint;
use num_traits::FromPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SEED: u64 = 20230111;
const ROWS: usize = 720;
const START: i64 = 1_673_395_200;
const SIGMA: f64 = 0.006;
const BASE_FEE: f64 = 1.6e-4;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/tests/fixtures/usdc_weth_hourly.csv".into());
    let meta = PoolMeta::default();
    let q128 = 2f64.powi(128);
    // whole-token liquidity to raw units: 10^((dx + dy) / 2); see fees module
    let y_scale = 10f64.powf((meta.decimals_x + meta.decimals_y) as f64 / 2.0 - meta.decimals_y as f64);
    let x_scale = 10f64.powf((meta.decimals_x + meta.decimals_y) as f64 / 2.0 - meta.decimals_x as f64);

    let path = sample_gbm_path(&GbmParams::new(SIGMA, 1350.0)?, ROWS - 1, SEED, 0);
    let prices: Vec<f64> = path.sqrt_prices().iter().map(|p| p.price()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    rng.set_stream(1);

    let mut counter_y = BigUint::from(3_400_000_000_000_000_000_000_000_000_000u128);
    let mut counter_x = BigUint::from(1_500_000_000_000_000_000_000_000_000_000_000u128) * 1000u32;
    let mut rows = Vec::with_capacity(ROWS);
    for (i, &price) in prices.iter().enumerate() {
        if i > 0 {
            let ret = (price / prices[i - 1]).ln();
            let z: f64 = StandardNormal.sample(&mut rng);
            let spike = 4e-4 * (ret.abs() / SIGMA - 2.0).max(0.0);
            let rate = BASE_FEE * (0.35 * z).exp() + spike;
            // buyers of x pay in y and vice versa
            let y_share = if ret >= 0.0 { 0.7 } else { 0.3 };
            let fee_y = rate * y_share;
            let fee_x = rate * (1.0 - y_share) / price;
            counter_y += BigUint::from_f64((fee_y / y_scale * q128).round()).expect("finite");
            counter_x += BigUint::from_f64((fee_x / x_scale * q128).round()).expect("finite");
        }
        // x is token 1 (WETH), y is token 0 (USDC)
        rows.push(PoolRow {
            timestamp: START + 3600 * i as i64,
            price,
            fee_growth_0: counter_y.clone(),
            fee_growth_1: counter_x.clone(),
        });
    }
    let dataset = PoolDataset::new(rows, meta)?;
    write_pool_csv(&dataset, &out)?;
    println!("wrote {} rows to {out}", dataset.len());
    Ok(())
}
