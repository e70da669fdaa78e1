//! OHLCV bars, validated series, temporal splits and decision windows.
//!
//! Timestamps are opaque ordered keys: no exchange calendar is applied and
//! prices are taken as already adjusted by the data provider.

mod csv_io;
mod synth;

use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{load_csv, load_csv_str, write_csv, ColumnMapping};
pub use synth::{synth_generate, synth_generate_labeled, RegimeKind, RegimeSegment, SynthConfig};

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse {field}: {value:?}")]
    Parse {
        row: usize,
        field: &'static str,
        value: String,
    },
    #[error("row {row}: invalid bar: {reason}")]
    InvalidBar { row: usize, reason: String },
    #[error("row {row}: non-monotone timestamps")]
    NonMonotone { row: usize },
    #[error("empty series")]
    Empty,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("series of length {len} too short to split into three non-empty parts")]
    TooShortToSplit { len: usize },
    #[error("invalid synthetic config: {0}")]
    InvalidSynth(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MarketDataError> = std::result::Result<T, E>;

/// One trading period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Bar {
    /// Checks the OHLCV invariants, returning a human readable reason on failure.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be finite and positive".into());
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err("volume must be finite and non-negative".into());
        }
        if self.low > self.high {
            return Err(format!("high {} < low {}", self.high, self.low));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!("low {} above min(open, close)", self.low));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!("high {} below max(open, close)", self.high));
        }
        Ok(())
    }
}

/// Ordered, validated price history of a single asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSeries {
    asset: String,
    bars: Vec<Bar>,
}

impl BarSeries {
    pub fn new(asset: impl Into<String>, bars: Vec<Bar>) -> Result<Self> {
        if bars.is_empty() {
            return Err(MarketDataError::Empty);
        }
        for (row, bar) in bars.iter().enumerate() {
            bar.validate()
                .map_err(|reason| MarketDataError::InvalidBar { row, reason })?;
        }
        if let Some(row) = bars.windows(2).position(|w| w[1].date <= w[0].date) {
            return Err(MarketDataError::NonMonotone { row: row + 1 });
        }
        Ok(Self {
            asset: asset.into(),
            bars,
        })
    }

    pub fn asset(&self) -> &str {
        &self.asset
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn highs(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.high).collect()
    }

    pub fn lows(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.low).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.volume).collect()
    }

    /// Contiguous sub-series; the range must be non-empty and in bounds.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.bars.len() {
            return Err(MarketDataError::Empty);
        }
        Ok(Self {
            asset: self.asset.clone(),
            bars: self.bars[range].to_vec(),
        })
    }

    /// Prefix `[0, end)`, used by no-lookahead checks.
    pub fn truncated(&self, end: usize) -> Result<Self> {
        self.slice(0..end)
    }
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(MarketDataError::InvalidSplit(
                "fractions must be positive".into(),
            ));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(MarketDataError::InvalidSplit(
                "fractions must sum to 1".into(),
            ));
        }
        Ok(())
    }

    /// Index ranges of the three parts for a series of length `n`.
    pub fn ranges(&self, n: usize) -> Result<[Range<usize>; 3]> {
        self.validate()?;
        if n < 5 {
            return Err(MarketDataError::TooShortToSplit { len: n });
        }
        // A tiny epsilon keeps products such as 0.29 * 100 from flooring to 28.
        let part = |f: f64| (n as f64 * f + 1e-9).floor() as usize;
        let n_train = part(self.train);
        let n_val = part(self.validation);
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(MarketDataError::TooShortToSplit { len: n });
        }
        Ok([0..n_train, n_train..n_train + n_val, n_train + n_val..n])
    }
}

/// Contiguous temporal partition, train first, remainder to test.
pub fn split(series: &BarSeries, spec: &SplitSpec) -> Result<(BarSeries, BarSeries, BarSeries)> {
    let [train, val, test] = spec.ranges(series.len())?;
    Ok((series.slice(train)?, series.slice(val)?, series.slice(test)?))
}

/// A lookback slice followed immediately by a horizon slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPair {
    pub lookback: Range<usize>,
    pub horizon: Range<usize>,
}

impl WindowPair {
    pub fn start(&self) -> usize {
        self.lookback.start
    }

    /// Index of the last lookback bar, where routing decisions are taken.
    pub fn decision_index(&self) -> usize {
        self.lookback.end - 1
    }
}

/// Enumerates `(lookback, horizon)` index pairs; trailing partial pairs are dropped.
///
/// Zero-sized parameters yield no windows.
pub fn window_indices(n: usize, lookback: usize, horizon: usize, stride: usize) -> Vec<WindowPair> {
    if lookback == 0 || horizon == 0 || stride == 0 {
        return Vec::new();
    }
    (0..)
        .map(|k| k * stride)
        .take_while(|s| s + lookback + horizon <= n)
        .map(|s| WindowPair {
            lookback: s..s + lookback,
            horizon: s + lookback..s + lookback + horizon,
        })
        .collect()
}

/// Slice view over [`window_indices`].
pub fn windows(
    series: &BarSeries,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> Vec<(&[Bar], &[Bar])> {
    window_indices(series.len(), lookback, horizon, stride)
        .into_iter()
        .map(|w| (&series.bars[w.lookback], &series.bars[w.horizon]))
        .collect()
}
