//! Paginated client for a Uniswap-v3-style GraphQL indexer.
//!
//! Hourly snapshots come from the `poolHourDatas` collection and are paged
//! by a `periodStartUnix` cursor. Transient failures (connection errors,
//! 429 and 5xx responses) are retried with exponential backoff.

use std::thread;
use std::time::Duration;

use num_bigint::BigUint;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{PoolDataset, PoolMeta, PoolRow};
use crate::error::{Error, IngestError, Result};

/// Environment variable consulted by the CLI for the default endpoint.
pub const ENDPOINT_ENV: &str = "LPCONC_INDEXER_URL";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Status(u16),
    Connection(String),
}

impl TransportError {
    fn is_transient(&self) -> bool {
        match self {
            TransportError::Status(code) => *code == 429 || *code >= 500,
            TransportError::Connection(_) => true,
        }
    }
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Status(code) => write!(f, "HTTP status {code}"),
            TransportError::Connection(msg) => write!(f, "{msg}"),
        }
    }
}

/// Minimal HTTP surface the client needs: POST a JSON body, get text back.
pub trait Transport {
    fn post_json(&self, url: &str, body: &str) -> std::result::Result<String, TransportError>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpTransport { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        HttpTransport::new(Duration::from_secs(60))
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, body: &str) -> std::result::Result<String, TransportError> {
        let response = self
            .agent
            .post(url)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| match e {
                ureq::Error::StatusCode(code) => TransportError::Status(code),
                other => TransportError::Connection(other.to_string()),
            })?;
        response
            .into_body()
            .read_to_string()
            .map_err(|e| TransportError::Connection(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct IndexerConfig {
    pub endpoint: String,
    pub page_size: usize,
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further attempt.
    pub initial_backoff: Duration,
    /// Which pool token is `x` (the volatile asset).
    pub x_token: u8,
}

impl IndexerConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        IndexerConfig {
            endpoint: endpoint.into(),
            page_size: 1000,
            max_retries: 4,
            initial_backoff: Duration::from_millis(500),
            x_token: 1,
        }
    }
}

/// Half-open range `[start, end)` of UNIX seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeRange {
    pub start: i64,
    pub end: i64,
}

const POOL_QUERY: &str = "query Pool($id: ID!) { pool(id: $id) { feeTier token0 { decimals } token1 { decimals } } }";

const HOURS_QUERY: &str = "query Hours($pool: String!, $after: Int!, $end: Int!, $first: Int!) { \
poolHourDatas(first: $first, orderBy: periodStartUnix, orderDirection: asc, \
where: { pool: $pool, periodStartUnix_gt: $after, periodStartUnix_lt: $end }) { \
periodStartUnix token0Price token1Price feeGrowthGlobal0X128 feeGrowthGlobal1X128 } }";

#[derive(Deserialize)]
struct Envelope<T> {
    data: Option<T>,
    errors: Option<Vec<Value>>,
}

#[derive(Deserialize)]
struct PoolData {
    pool: Option<PoolInfo>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PoolInfo {
    fee_tier: Value,
    token0: TokenInfo,
    token1: TokenInfo,
}

#[derive(Deserialize)]
struct TokenInfo {
    decimals: Value,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct HoursData {
    pool_hour_datas: Vec<HourRow>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct HourRow {
    period_start_unix: i64,
    token0_price: String,
    token1_price: String,
    #[serde(rename = "feeGrowthGlobal0X128")]
    fee_growth_global0_x128: String,
    #[serde(rename = "feeGrowthGlobal1X128")]
    fee_growth_global1_x128: String,
}

/// Subgraph scalars arrive as strings or numbers depending on the schema.
fn value_as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

/// Fetches hourly snapshots over `range` with the default HTTP transport.
pub fn fetch_pool_history(
    config: &IndexerConfig,
    pool_id: &str,
    range: TimeRange,
) -> Result<PoolDataset> {
    fetch_pool_history_with(&HttpTransport::default(), config, pool_id, range)
}

pub fn fetch_pool_history_with(
    transport: &impl Transport,
    config: &IndexerConfig,
    pool_id: &str,
    range: TimeRange,
) -> Result<PoolDataset> {
    if range.start >= range.end {
        return Err(Error::param(format!(
            "empty time range [{}, {})",
            range.start, range.end
        )));
    }
    if config.page_size == 0 {
        return Err(Error::param("page size must be positive"));
    }
    let pool_id = pool_id.to_lowercase();
    let meta = fetch_meta(transport, config, &pool_id)?;

    let mut rows = Vec::new();
    let mut after = range.start - 1;
    loop {
        let body = json!({
            "query": HOURS_QUERY,
            "variables": {
                "pool": pool_id,
                "after": after,
                "end": range.end,
                "first": config.page_size,
            }
        });
        let page: HoursData = query(transport, config, &body)?;
        let n = page.pool_hour_datas.len();
        for h in page.pool_hour_datas {
            after = after.max(h.period_start_unix);
            rows.push(convert_row(h, config.x_token)?);
        }
        if n < config.page_size {
            break;
        }
    }
    if rows.is_empty() {
        return Err(IngestError::Empty.into());
    }
    PoolDataset::new(rows, meta)
}

fn fetch_meta(transport: &impl Transport, config: &IndexerConfig, pool_id: &str) -> Result<PoolMeta> {
    let body = json!({ "query": POOL_QUERY, "variables": { "id": pool_id } });
    let data: PoolData = query(transport, config, &body)?;
    let pool = data
        .pool
        .ok_or_else(|| Error::data(format!("indexer knows no pool `{pool_id}`")))?;
    let decimals = |t: &TokenInfo| {
        value_as_f64(&t.decimals)
            .filter(|d| *d >= 0.0 && d.fract() == 0.0)
            .map(|d| d as u32)
            .ok_or_else(|| Error::data("token decimals missing from indexer response"))
    };
    let d0 = decimals(&pool.token0)?;
    let d1 = decimals(&pool.token1)?;
    // fee tiers are reported in hundredths of a basis point
    let fee_tier = value_as_f64(&pool.fee_tier)
        .ok_or_else(|| Error::data("fee tier missing from indexer response"))?
        / 1e6;
    let (decimals_x, decimals_y) = if config.x_token == 0 { (d0, d1) } else { (d1, d0) };
    let meta = PoolMeta {
        x_token: config.x_token,
        decimals_x,
        decimals_y,
        fee_tier,
    };
    meta.validate()?;
    Ok(meta)
}

fn convert_row(h: HourRow, x_token: u8) -> Result<PoolRow> {
    // token0Price is token0 per token1
    let raw_price = if x_token == 1 { &h.token0_price } else { &h.token1_price };
    let price: f64 = raw_price
        .parse()
        .map_err(|_| Error::data(format!("bad price `{raw_price}` at {}", h.period_start_unix)))?;
    let counter = |s: &str| {
        BigUint::parse_bytes(s.as_bytes(), 10)
            .ok_or_else(|| Error::data(format!("bad fee counter `{s}` at {}", h.period_start_unix)))
    };
    Ok(PoolRow {
        timestamp: h.period_start_unix,
        price,
        fee_growth_0: counter(&h.fee_growth_global0_x128)?,
        fee_growth_1: counter(&h.fee_growth_global1_x128)?,
    })
}

fn query<T: for<'de> Deserialize<'de>>(
    transport: &impl Transport,
    config: &IndexerConfig,
    body: &Value,
) -> Result<T> {
    let text = post_with_retry(transport, config, &body.to_string())?;
    let envelope: Envelope<T> = serde_json::from_str(&text)
        .map_err(|e| Error::Network(format!("malformed indexer response: {e}")))?;
    if let Some(errors) = envelope.errors.filter(|e| !e.is_empty()) {
        return Err(Error::Network(format!("indexer returned errors: {}", Value::from(errors))));
    }
    envelope
        .data
        .ok_or_else(|| Error::Network("indexer response has no data".into()))
}

fn post_with_retry(transport: &impl Transport, config: &IndexerConfig, body: &str) -> Result<String> {
    let mut delay = config.initial_backoff;
    let mut attempt = 0;
    loop {
        match transport.post_json(&config.endpoint, body) {
            Ok(text) => return Ok(text),
            Err(e) if e.is_transient() && attempt < config.max_retries => {
                attempt += 1;
                thread::sleep(delay);
                delay *= 2;
            }
            Err(e) => {
                return Err(Error::Network(format!(
                    "{} failed after {} attempt(s): {e}",
                    config.endpoint,
                    attempt + 1
                )))
            }
        }
    }
}
