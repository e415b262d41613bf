use lpconc::backtest::{full_range_baseline, run_backtest, trajectory_csv, TRAJECTORY_CSV_HEADER};
use lpconc::market_data::{
    fee_rate_series, load_pool_csv, median_fee_rate, meta_path_for, write_pool_csv, PoolMeta,
};
use lpconc::stochastic::estimate_sigma;
use lpconc::strategy::{run_strategy, FeeRates, StrategyParams};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/usdc_weth_hourly.csv");

#[test]
fn bundled_sample_loads_with_metadata() {
    let data = load_pool_csv(FIXTURE).unwrap();
    assert_eq!(data.len(), 720);
    assert_eq!(*data.meta(), PoolMeta::default());
    assert!(data.gaps().is_empty());
    let sigma = estimate_sigma(&data.marginal_prices()).unwrap();
    assert!((sigma - 0.006).abs() < 0.001, "sigma {sigma}");
    let fee = median_fee_rate(&fee_rate_series(&data)).unwrap();
    assert!((1e-4..3e-4).contains(&fee), "median fee {fee}");
}

#[test]
fn write_then_load_is_identity() {
    let data = load_pool_csv(FIXTURE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.csv");
    write_pool_csv(&data, &path).unwrap();
    assert!(meta_path_for(&path).exists());
    let back = load_pool_csv(&path).unwrap();
    assert_eq!(back.rows(), data.rows());
    assert_eq!(back.meta(), data.meta());
}

#[test]
fn wide_interval_tracks_full_range() {
    let data = load_pool_csv(FIXTURE).unwrap();
    let p = StrategyParams::new(4.0, 0.0, 109.8, 0.0005).unwrap();
    let banded = run_backtest(&data, &p, 1e5).unwrap();
    let full = full_range_baseline(&data, 1e5).unwrap();
    assert_eq!(banded.reallocation_count, 0);
    // a wide band earns more fees per unit of wealth than full range
    assert!(banded.fees_per_step_pct > full.fees_per_step_pct);
    assert!(banded.hold_profit_pct == full.hold_profit_pct);
}

#[test]
fn trajectory_has_one_row_per_snapshot() {
    let data = load_pool_csv(FIXTURE).unwrap();
    let path = data.price_path().unwrap();
    let fees = fee_rate_series(&data);
    let p = StrategyParams::new(1.02, 0.0, 109.8, 0.0005).unwrap();
    let run = run_strategy(&path, FeeRates::PerStep(fees.rates()), &p, 1e5).unwrap();
    let csv = trajectory_csv(&run, &path);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TRAJECTORY_CSV_HEADER);
    assert_eq!(lines.len(), 2 + run.steps.len());
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[1].parse::<f64>().unwrap(), data.rows()[0].price);
}
