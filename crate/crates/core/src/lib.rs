pub mod amm;
pub mod backtest;
pub mod error;
pub mod market_data;
pub mod optimizer;
pub mod stochastic;
pub mod strategy;

pub use error::{Error, IngestError, Result};
