use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{Bar, BarSeries, MarketDataError, Result};

/// Header names of the OHLCV columns. Matching is exact after trimming.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub date: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            date: "date".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnMapping) -> Result<BarSeries> {
    let path = path.as_ref();
    let asset = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "asset".into());
    let file = std::fs::File::open(path)?;
    read_series(file, asset, schema)
}

pub fn load_csv_str(asset: &str, text: &str, schema: &ColumnMapping) -> Result<BarSeries> {
    read_series(text.as_bytes(), asset.to_string(), schema)
}

fn parse_date(row: usize, raw: &str) -> Result<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S").map(|d| d.date()))
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S").map(|d| d.date()))
        .map_err(|_| MarketDataError::Parse {
            row,
            field: "date",
            value: raw.to_string(),
        })
}

fn parse_num(row: usize, field: &'static str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| MarketDataError::Parse {
            row,
            field,
            value: raw.to_string(),
        })
}

fn read_series<R: Read>(reader: R, asset: String, schema: &ColumnMapping) -> Result<BarSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MarketDataError::MissingColumn(name.to_string()))
    };
    let idx = [
        col(&schema.date)?,
        col(&schema.open)?,
        col(&schema.high)?,
        col(&schema.low)?,
        col(&schema.close)?,
        col(&schema.volume)?,
    ];

    let mut bars: Vec<Bar> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(idx[i]).unwrap_or("");
        let bar = Bar {
            date: parse_date(row, field(0))?,
            open: parse_num(row, "open", field(1))?,
            high: parse_num(row, "high", field(2))?,
            low: parse_num(row, "low", field(3))?,
            close: parse_num(row, "close", field(4))?,
            volume: parse_num(row, "volume", field(5))?,
        };
        bar.validate()
            .map_err(|reason| MarketDataError::InvalidBar { row, reason })?;
        if let Some(prev) = bars.last() {
            if bar.date <= prev.date {
                return Err(MarketDataError::NonMonotone { row });
            }
        }
        bars.push(bar);
    }
    BarSeries::new(asset, bars)
}

/// Writes `date,open,high,low,close,volume` with 12 significant digits.
pub fn write_csv<W: Write>(series: &BarSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "open", "high", "low", "close", "volume"])?;
    for b in series.bars() {
        w.write_record([
            b.date.format("%Y-%m-%d").to_string(),
            fmt12(b.open),
            fmt12(b.high),
            fmt12(b.low),
            fmt12(b.close),
            fmt12(b.volume),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn fmt12(v: f64) -> String {
    format!("{}", format!("{v:.11e}").parse::<f64>().unwrap_or(v))
}
