//! Zero-drift geometric Brownian motion for the marginal price.
//!
//! The marginal price follows `dP = σ P dW`, so one step multiplies it by
//! `exp(-σ²/2 + σ Z)`. Paths are returned as sqrt prices for the strategy
//! engine. Path `i` of a batch is a pure function of `(seed, i)`: each path
//! draws from its own ChaCha stream, which makes batches reproducible no
//! matter how they are split or parallelised.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amm::SqrtPrice;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    /// Per-step volatility of the marginal price.
    pub sigma: f64,
    /// Marginal price at `t = 0`.
    pub initial_price: f64,
}

impl GbmParams {
    pub fn new(sigma: f64, initial_price: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::param(format!("sigma must be nonnegative, got {sigma}")));
        }
        if !(initial_price.is_finite() && initial_price > 0.0) {
            return Err(Error::param(format!(
                "initial price must be positive, got {initial_price}"
            )));
        }
        Ok(GbmParams { sigma, initial_price })
    }

    pub fn initial_sqrt_price(&self) -> SqrtPrice {
        SqrtPrice::from_price(self.initial_price).expect("validated on construction")
    }
}

/// Sqrt prices `π_0 … π_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath(Vec<SqrtPrice>);

impl PricePath {
    pub fn new(sqrt_prices: Vec<SqrtPrice>) -> Result<Self> {
        if sqrt_prices.is_empty() {
            return Err(Error::param("price path is empty"));
        }
        Ok(PricePath(sqrt_prices))
    }

    /// Builds a path from marginal prices.
    pub fn from_marginal_prices(prices: &[f64]) -> Result<Self> {
        let sqrt = prices
            .iter()
            .map(|&p| SqrtPrice::from_price(p))
            .collect::<Result<Vec<_>>>()?;
        PricePath::new(sqrt)
    }

    /// Builds a path from raw sqrt-price values.
    pub fn from_sqrt_values(values: &[f64]) -> Result<Self> {
        let sqrt = values
            .iter()
            .map(|&v| SqrtPrice::new(v))
            .collect::<Result<Vec<_>>>()?;
        PricePath::new(sqrt)
    }

    pub fn sqrt_prices(&self) -> &[SqrtPrice] {
        &self.0
    }

    /// Number of steps `T` (one less than the number of observations).
    pub fn horizon(&self) -> usize {
        self.0.len() - 1
    }

    pub fn initial(&self) -> SqrtPrice {
        self.0[0]
    }

    pub fn last(&self) -> SqrtPrice {
        self.0[self.0.len() - 1]
    }

    pub fn min_max(&self) -> (SqrtPrice, SqrtPrice) {
        let mut lo = self.0[0];
        let mut hi = self.0[0];
        for &p in &self.0[1..] {
            if p.value() < lo.value() {
                lo = p;
            }
            if p.value() > hi.value() {
                hi = p;
            }
        }
        (lo, hi)
    }
}

/// Sample standard deviation (`n - 1` denominator) of the log returns of a
/// marginal price series.
pub fn estimate_sigma(marginal_prices: &[f64]) -> Result<f64> {
    if marginal_prices.len() < 2 {
        return Err(Error::data("at least two prices are needed to estimate sigma"));
    }
    if let Some((i, p)) = marginal_prices
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && **p > 0.0))
    {
        return Err(Error::data(format!("price at index {i} is not positive: {p}")));
    }
    let returns: Vec<f64> = marginal_prices
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    if returns.len() < 2 {
        return Ok(0.0);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let ss: f64 = returns.iter().map(|r| (r - mean).powi(2)).sum();
    Ok((ss / (n - 1.0)).sqrt())
}

/// One GBM path of `horizon` steps, drawn from stream `index` of `seed`.
pub fn sample_gbm_path(params: &GbmParams, horizon: usize, seed: u64, index: u64) -> PricePath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let drift = -0.5 * params.sigma * params.sigma;
    let mut price = params.initial_price;
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(params.initial_sqrt_price());
    for _ in 0..horizon {
        let z: f64 = StandardNormal.sample(&mut rng);
        price *= (drift + params.sigma * z).exp();
        out.push(SqrtPrice::from_price(price).expect("GBM keeps prices positive"));
    }
    PricePath(out)
}

/// `num_paths` GBM paths of `horizon` steps.
pub fn sample_gbm_paths(
    params: &GbmParams,
    num_paths: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<PricePath>> {
    if num_paths == 0 || horizon == 0 {
        return Err(Error::param("number of paths and horizon must both be at least 1"));
    }
    Ok((0..num_paths as u64)
        .into_par_iter()
        .map(|i| sample_gbm_path(params, horizon, seed, i))
        .collect())
}
