use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigUint;

use super::{PoolDataset, PoolMeta, PoolRow};
use crate::error::{Error, IngestError, Result};

pub const CSV_HEADER: &str = "timestamp,price,fee_growth_0_x128,fee_growth_1_x128";

/// Sidecar holding the [`PoolMeta`] of a dataset file: `<file>.meta.json`.
pub fn meta_path_for(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Loads a dataset, taking pool metadata from the sidecar when present and
/// falling back to [`PoolMeta::default`].
pub fn load_pool_csv(path: impl AsRef<Path>) -> Result<PoolDataset> {
    let path = path.as_ref();
    let meta_path = meta_path_for(path);
    let meta = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path)?;
        serde_json::from_str(&text).map_err(|e| {
            Error::data(format!("{}: malformed pool metadata: {e}", meta_path.display()))
        })?
    } else {
        PoolMeta::default()
    };
    read_pool_csv(File::open(path)?, meta)
}

/// Parses the CSV schema from any reader.
pub fn read_pool_csv(reader: impl Read, meta: PoolMeta) -> Result<PoolDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| IngestError::Schema {
            row: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(IngestError::Header {
            expected: CSV_HEADER.to_string(),
            found: header,
        }
        .into());
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IngestError::Schema {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 4 {
            return Err(IngestError::Schema {
                row: line,
                message: format!("expected 4 fields, found {}", record.len()),
            }
            .into());
        }
        let schema = |message: String| IngestError::Schema { row: line, message };
        let timestamp: i64 = record[0]
            .parse()
            .map_err(|_| schema(format!("bad timestamp `{}`", &record[0])))?;
        let price: f64 = record[1]
            .parse()
            .map_err(|_| schema(format!("bad price `{}`", &record[1])))?;
        let fee_growth_0 = parse_counter(&record[2]).ok_or_else(|| {
            schema(format!("fee_growth_0_x128 is not a decimal integer: `{}`", &record[2]))
        })?;
        let fee_growth_1 = parse_counter(&record[3]).ok_or_else(|| {
            schema(format!("fee_growth_1_x128 is not a decimal integer: `{}`", &record[3]))
        })?;
        rows.push((
            line,
            PoolRow {
                timestamp,
                price,
                fee_growth_0,
                fee_growth_1,
            },
        ));
    }
    PoolDataset::from_numbered(rows, meta)
}

fn parse_counter(s: &str) -> Option<BigUint> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigUint::parse_bytes(s.as_bytes(), 10)
}

/// Renders the dataset in the CSV schema. Prices use the shortest
/// representation that parses back to the same float.
pub fn to_csv_string(dataset: &PoolDataset) -> String {
    let mut out = String::with_capacity(dataset.len() * 96);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in dataset.rows() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.timestamp, r.price, r.fee_growth_0, r.fee_growth_1
        ));
    }
    out
}

/// Writes the CSV and its metadata sidecar.
pub fn write_pool_csv(dataset: &PoolDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path)?;
    f.write_all(to_csv_string(dataset).as_bytes())?;
    let meta = serde_json::to_string_pretty(dataset.meta()).expect("meta serializes");
    std::fs::write(meta_path_for(path), meta + "\n")?;
    Ok(())
}
