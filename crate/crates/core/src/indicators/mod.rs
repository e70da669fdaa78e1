//! Technical indicators over bar series.
//!
//! Every function is causal: the value at index `t` reads inputs at indices
//! `<= t` only. Leading entries that lack enough history are `None`, and the
//! defined suffix is always contiguous.

mod features;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::Bar;

pub use features::{
    feature_matrix, summary_stats, FeatureMatrix, FeatureSource, MaOrder, MarketSummary,
    RsiZone, SummaryStats, VolatilityChange, FEATURE_NAMES, N_FEATURES, N_SUMMARY_FEATURES,
};

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("{name}: period must be at least {min}")]
    BadPeriod {
        name: &'static str,
        min: usize,
    },
    #[error("{name}: needs at least {needed} bars, got {len}")]
    TooShort {
        name: &'static str,
        needed: usize,
        len: usize,
    },
    #[error("index {t} needs at least {needed} bars of history")]
    InsufficientHistory { t: usize, needed: usize },
    #[error("index {t} out of range for series of length {len}")]
    OutOfRange { t: usize, len: usize },
}

pub type Result<T, E = IndicatorError> = std::result::Result<T, E>;

/// One indicator value per bar; warm-up entries are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorColumn {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

impl IndicatorColumn {
    fn new(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        self.values.get(t).copied().flatten()
    }

    /// Index of the first defined value.
    pub fn first_defined(&self) -> Option<usize> {
        self.values.iter().position(Option::is_some)
    }
}

fn check_period(name: &'static str, n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(IndicatorError::BadPeriod { name, min })
    } else {
        Ok(())
    }
}

fn check_len(name: &'static str, len: usize, needed: usize) -> Result<()> {
    if len < needed {
        Err(IndicatorError::TooShort { name, needed, len })
    } else {
        Ok(())
    }
}

/// Simple moving average, computed as a direct window sum so that no
/// rounding drift accumulates along long series.
pub fn sma(xs: &[f64], n: usize) -> Result<IndicatorColumn> {
    check_period("sma", n, 1)?;
    let values = (0..xs.len())
        .map(|t| (t + 1 >= n).then(|| xs[t + 1 - n..=t].iter().sum::<f64>() / n as f64))
        .collect();
    Ok(IndicatorColumn::new(format!("sma{n}"), values))
}

/// EMA seeded with the SMA of the first `n` values, `alpha = 2 / (n + 1)`.
pub fn ema(xs: &[f64], n: usize) -> Result<IndicatorColumn> {
    check_period("ema", n, 1)?;
    Ok(IndicatorColumn::new(format!("ema{n}"), ema_values(xs, n)))
}

fn ema_values(xs: &[f64], n: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; xs.len()];
    if xs.len() < n {
        return out;
    }
    let alpha = 2.0 / (n as f64 + 1.0);
    let mut e = xs[..n].iter().sum::<f64>() / n as f64;
    out[n - 1] = Some(e);
    for t in n..xs.len() {
        e = alpha * xs[t] + (1.0 - alpha) * e;
        out[t] = Some(e);
    }
    out
}

fn rsi_from(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        if avg_gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

/// Wilder RSI, first defined at index `n`.
pub fn rsi(closes: &[f64], n: usize) -> Result<IndicatorColumn> {
    check_period("rsi", n, 1)?;
    let mut out = vec![None; closes.len()];
    if closes.len() > n {
        let change = |t: usize| closes[t] - closes[t - 1];
        let nf = n as f64;
        let mut g = (1..=n).map(|t| change(t).max(0.0)).sum::<f64>() / nf;
        let mut l = (1..=n).map(|t| (-change(t)).max(0.0)).sum::<f64>() / nf;
        out[n] = Some(rsi_from(g, l));
        for t in n + 1..closes.len() {
            let d = change(t);
            g = (g * (nf - 1.0) + d.max(0.0)) / nf;
            l = (l * (nf - 1.0) + (-d).max(0.0)) / nf;
            out[t] = Some(rsi_from(g, l));
        }
    }
    Ok(IndicatorColumn::new(format!("rsi{n}"), out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bands {
    pub upper: IndicatorColumn,
    pub middle: IndicatorColumn,
    pub lower: IndicatorColumn,
}

/// Bollinger bands with population standard deviation.
pub fn bollinger(closes: &[f64], n: usize, k: f64) -> Result<Bands> {
    check_period("bollinger", n, 2)?;
    let len = closes.len();
    let (mut up, mut mid, mut lo) = (vec![None; len], vec![None; len], vec![None; len]);
    for t in n - 1..len {
        let w = &closes[t + 1 - n..=t];
        let m = w.iter().sum::<f64>() / n as f64;
        let sd = (w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64).sqrt();
        up[t] = Some(m + k * sd);
        mid[t] = Some(m);
        lo[t] = Some(m - k * sd);
    }
    Ok(Bands {
        upper: IndicatorColumn::new("boll_upper", up),
        middle: IndicatorColumn::new("boll_middle", mid),
        lower: IndicatorColumn::new("boll_lower", lo),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kdj {
    pub k: IndicatorColumn,
    pub d: IndicatorColumn,
    pub j: IndicatorColumn,
}

/// Stochastic KDJ. RSV uses the last `n` bars including the current one;
/// K and D start from 50 and a flat window gives RSV = 50.
pub fn kdj(bars: &[Bar], n: usize) -> Result<Kdj> {
    check_period("kdj", n, 1)?;
    let len = bars.len();
    let (mut kc, mut dc, mut jc) = (vec![None; len], vec![None; len], vec![None; len]);
    let (mut k, mut d) = (50.0, 50.0);
    for t in n - 1..len {
        let w = &bars[t + 1 - n..=t];
        let hh = w.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
        let ll = w.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
        let rsv = if hh > ll {
            100.0 * (bars[t].close - ll) / (hh - ll)
        } else {
            50.0
        };
        k = 2.0 / 3.0 * k + rsv / 3.0;
        d = 2.0 / 3.0 * d + k / 3.0;
        kc[t] = Some(k);
        dc[t] = Some(d);
        jc[t] = Some(3.0 * k - 2.0 * d);
    }
    Ok(Kdj {
        k: IndicatorColumn::new("kdj_k", kc),
        d: IndicatorColumn::new("kdj_d", dc),
        j: IndicatorColumn::new("kdj_j", jc),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Macd {
    pub dif: IndicatorColumn,
    pub dea: IndicatorColumn,
    pub hist: IndicatorColumn,
}

/// MACD(12, 26, 9). DEA is the EMA9 of the defined part of DIF.
pub fn macd(closes: &[f64]) -> Result<Macd> {
    check_len("macd", closes.len(), 26)?;
    let fast = ema_values(closes, 12);
    let slow = ema_values(closes, 26);
    let dif: Vec<Option<f64>> = fast
        .iter()
        .zip(&slow)
        .map(|(f, s)| Some((*f)? - (*s)?))
        .collect();
    let start = 25;
    let defined: Vec<f64> = dif[start..].iter().map(|v| v.expect("defined")).collect();
    let mut dea = vec![None; start];
    dea.extend(ema_values(&defined, 9));
    let hist = dif
        .iter()
        .zip(&dea)
        .map(|(a, b)| Some((*a)? - (*b)?))
        .collect();
    Ok(Macd {
        dif: IndicatorColumn::new("macd_dif", dif),
        dea: IndicatorColumn::new("macd_dea", dea),
        hist: IndicatorColumn::new("macd_hist", hist),
    })
}

/// True range per bar; undefined at index 0, which has no previous close.
pub fn true_range(bars: &[Bar]) -> Vec<Option<f64>> {
    (0..bars.len())
        .map(|t| {
            (t > 0).then(|| {
                let pc = bars[t - 1].close;
                bars[t].high.max(pc) - bars[t].low.min(pc)
            })
        })
        .collect()
}

/// Unweighted mean of the last `n` true ranges, first defined at index `n`.
pub fn atr(bars: &[Bar], n: usize) -> Result<IndicatorColumn> {
    check_period("atr", n, 1)?;
    check_len("atr", bars.len(), n + 1)?;
    let tr = true_range(bars);
    let values = (0..bars.len())
        .map(|t| {
            (t >= n).then(|| tr[t + 1 - n..=t].iter().map(|v| v.expect("t >= 1")).sum::<f64>() / n as f64)
        })
        .collect();
    Ok(IndicatorColumn::new(format!("atr{n}"), values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adx {
    pub adx: IndicatorColumn,
    pub plus_di: IndicatorColumn,
    pub minus_di: IndicatorColumn,
}

/// Wilder's directional movement system.
///
/// Smoothed sums start as plain sums over bars `1..=n`; +DI/-DI are defined
/// from index `n` and ADX from `2n - 1`, seeded with the mean of the first
/// `n` DX values. Zero denominators produce 0.
pub fn adx_di(bars: &[Bar], n: usize) -> Result<Adx> {
    check_period("adx", n, 1)?;
    check_len("adx", bars.len(), 2 * n + 1)?;
    let len = bars.len();
    let nf = n as f64;
    let mut pdm = vec![0.0; len];
    let mut mdm = vec![0.0; len];
    let mut tr = vec![0.0; len];
    for t in 1..len {
        let up = bars[t].high - bars[t - 1].high;
        let down = bars[t - 1].low - bars[t].low;
        pdm[t] = if up > down && up > 0.0 { up } else { 0.0 };
        mdm[t] = if down > up && down > 0.0 { down } else { 0.0 };
        let pc = bars[t - 1].close;
        tr[t] = bars[t].high.max(pc) - bars[t].low.min(pc);
    }

    let (mut pdi, mut mdi, mut adx) = (vec![None; len], vec![None; len], vec![None; len]);
    let mut sp: f64 = pdm[1..=n].iter().sum();
    let mut sm: f64 = mdm[1..=n].iter().sum();
    let mut st: f64 = tr[1..=n].iter().sum();
    let mut dx_seed = 0.0;
    let mut a = 0.0;
    for t in n..len {
        if t > n {
            sp = sp - sp / nf + pdm[t];
            sm = sm - sm / nf + mdm[t];
            st = st - st / nf + tr[t];
        }
        let (p, m) = if st > 0.0 {
            (100.0 * sp / st, 100.0 * sm / st)
        } else {
            (0.0, 0.0)
        };
        pdi[t] = Some(p);
        mdi[t] = Some(m);
        let dx = if p + m > 0.0 {
            100.0 * (p - m).abs() / (p + m)
        } else {
            0.0
        };
        if t < 2 * n - 1 {
            dx_seed += dx;
        } else if t == 2 * n - 1 {
            a = (dx_seed + dx) / nf;
            adx[t] = Some(a);
        } else {
            a = (a * (nf - 1.0) + dx) / nf;
            adx[t] = Some(a);
        }
    }
    Ok(Adx {
        adx: IndicatorColumn::new(format!("adx{n}"), adx),
        plus_di: IndicatorColumn::new("plus_di", pdi),
        minus_di: IndicatorColumn::new("minus_di", mdi),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub upper: IndicatorColumn,
    pub lower: IndicatorColumn,
}

/// Donchian channel over the `n` bars before `t`, excluding bar `t` itself.
pub fn donchian(bars: &[Bar], n: usize) -> Result<Channel> {
    check_period("donchian", n, 1)?;
    let len = bars.len();
    let (mut up, mut lo) = (vec![None; len], vec![None; len]);
    for t in n..len {
        let w = &bars[t - n..t];
        up[t] = Some(w.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max));
        lo[t] = Some(w.iter().map(|b| b.low).fold(f64::INFINITY, f64::min));
    }
    Ok(Channel {
        upper: IndicatorColumn::new(format!("donchian_high{n}"), up),
        lower: IndicatorColumn::new(format!("donchian_low{n}"), lo),
    })
}

/// Closes rising by a fixed step; handy for tests and examples.
#[cfg(test)]
pub(crate) fn bars_from_closes(closes: &[f64], spread: f64) -> Vec<Bar> {
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    closes
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let open = if i == 0 { c } else { closes[i - 1] };
            Bar {
                date: start + chrono::Days::new(i as u64),
                open,
                high: open.max(c) + spread,
                low: open.min(c) - spread,
                close: c,
                volume: 1000.0,
            }
        })
        .collect()
}
