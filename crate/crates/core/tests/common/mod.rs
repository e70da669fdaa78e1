//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use chrono::{Days, NaiveDate};
use moe_trader::market_data::{Bar, BarSeries};

/// Bars whose open is the previous close and whose wicks extend `spread`
/// beyond the body.
pub fn bars(closes: &[f64], volumes: &[f64], spread: f64) -> Vec<Bar> {
    assert_eq!(closes.len(), volumes.len());
    let start = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
    closes
        .iter()
        .zip(volumes)
        .enumerate()
        .map(|(i, (&c, &v))| {
            let open = if i == 0 { c } else { closes[i - 1] };
            Bar {
                date: start + Days::new(i as u64),
                open,
                high: open.max(c) + spread,
                low: open.min(c) - spread,
                close: c,
                volume: v,
            }
        })
        .collect()
}

pub fn series(closes: &[f64], volumes: &[f64], spread: f64) -> BarSeries {
    BarSeries::new("TEST", bars(closes, volumes, spread)).unwrap()
}

/// Prices from a start value and per-bar relative changes.
pub fn compound(start: f64, changes: &[f64]) -> Vec<f64> {
    let mut p = start;
    let mut out = vec![p];
    for c in changes {
        p *= 1.0 + c;
        out.push(p);
    }
    out
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares `actual` with a frozen file. `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e} (run with UPDATE_GOLDEN=1)", path.display()));
    if expected != actual {
        let diff = expected
            .lines()
            .zip(actual.lines())
            .enumerate()
            .find(|(_, (a, b))| a != b)
            .map(|(i, (a, b))| format!("line {}:\n  golden: {a}\n  actual: {b}", i + 1))
            .unwrap_or_else(|| "line count differs".into());
        panic!("{} no longer matches: {diff}", path.display());
    }
}

pub mod indicator_oracle;
pub mod experiments;
pub mod learning_checks;
pub mod metric_oracle;
pub mod regimes;
pub mod runs;
pub mod scenarios;
pub mod strategy_oracle;

/// Random OHLCV bars with occasional flat stretches, seeded.
pub fn random_bars(seed: u64, n: usize) -> Vec<Bar> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let mut close: f64 = rng.random_range(20.0..200.0);
    let mut flat = 0usize;
    (0..n)
        .map(|i| {
            if flat == 0 && rng.random_bool(0.05) {
                flat = rng.random_range(2..6);
            }
            let open = close;
            if flat > 0 {
                flat -= 1;
            } else {
                close *= 1.0 + rng.random_range(-0.04..0.04);
            }
            let wick = if flat > 0 { 0.0 } else { close * rng.random_range(0.0..0.02) };
            Bar {
                date: start + Days::new(i as u64),
                open,
                high: open.max(close) + wick,
                low: open.min(close) - wick * rng.random_range(0.0..1.0),
                close,
                volume: rng.random_range(100.0..5000.0),
            }
        })
        .collect()
}
