//! Standardized per-window feature matrix and scalar market summaries.

use serde::{Deserialize, Serialize};

use super::{atr, bollinger, kdj, rsi, sma, IndicatorColumn, IndicatorError, Result};
use crate::market_data::Bar;

pub const N_FEATURES: usize = 17;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "close",
    "high",
    "low",
    "open",
    "norm_volume",
    "price_change",
    "amplitude",
    "ma10",
    "ma20",
    "ma100",
    "rsi14",
    "boll_upper",
    "boll_middle",
    "boll_lower",
    "kdj_k",
    "kdj_d",
    "kdj_j",
];

/// Length of [`SummaryStats::numeric`].
pub const N_SUMMARY_FEATURES: usize = 10;

/// Bands used by the feature matrix and the band-width summary.
const BOLL_PERIOD: usize = 20;
const BOLL_K: f64 = 2.0;
/// Volume ratio lookback.
const VOL_RATIO_N: usize = 5;
/// Relative band around the trailing ATR mean treated as stable.
const VOL_CHANGE_BAND: f64 = 0.05;
/// Slowest feature (MA100) warm-up.
const SLOW_WARMUP: usize = 99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    k: usize,
    raw: Vec<f64>,
    standardized: Vec<f64>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.k
    }

    pub fn cols(&self) -> usize {
        N_FEATURES
    }

    pub fn raw(&self, r: usize, c: usize) -> f64 {
        self.raw[r * N_FEATURES + c]
    }

    pub fn standardized(&self, r: usize, c: usize) -> f64 {
        self.standardized[r * N_FEATURES + c]
    }

    pub fn standardized_row(&self, r: usize) -> &[f64] {
        &self.standardized[r * N_FEATURES..(r + 1) * N_FEATURES]
    }

    pub fn raw_row(&self, r: usize) -> &[f64] {
        &self.raw[r * N_FEATURES..(r + 1) * N_FEATURES]
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// True when column `c` was treated as constant and zeroed.
    pub fn is_constant(&self, c: usize) -> bool {
        (0..self.k).all(|r| self.standardized(r, c) == 0.0) && is_flat(self.std[c], self.mean[c])
    }
}

fn is_flat(std: f64, mean: f64) -> bool {
    std < 1e-14 * mean.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaOrder {
    Bullish,
    Bearish,
    Mixed,
}

impl MaOrder {
    fn sign(self) -> f64 {
        match self {
            MaOrder::Bullish => 1.0,
            MaOrder::Bearish => -1.0,
            MaOrder::Mixed => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RsiZone {
    Oversold,
    Neutral,
    Overbought,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolatilityChange {
    Increasing,
    Decreasing,
    Stable,
}

/// Three-part textual market description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketSummary {
    pub ma_state: MaOrder,
    pub rsi_zone: RsiZone,
    pub volatility_change: VolatilityChange,
}

impl std::fmt::Display for MarketSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ma = match self.ma_state {
            MaOrder::Bullish => "Bullish order",
            MaOrder::Bearish => "Bearish order",
            MaOrder::Mixed => "Mixed",
        };
        let rsi = match self.rsi_zone {
            RsiZone::Oversold => "Oversold",
            RsiZone::Neutral => "Neutral",
            RsiZone::Overbought => "Overbought",
        };
        let vol = match self.volatility_change {
            VolatilityChange::Increasing => "Increasing volatility",
            VolatilityChange::Decreasing => "Decreasing volatility",
            VolatilityChange::Stable => "Stable volatility",
        };
        write!(f, "{ma}; {rsi}; {vol}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub delta: f64,
    pub amplitude: f64,
    pub volume_ratio: f64,
    /// Sample std of the last 100 log returns.
    pub volatility: f64,
    pub atr: f64,
    pub ma_order: MaOrder,
    pub rsi: f64,
    pub band_width_ratio: f64,
    pub summary: MarketSummary,
    pub close: f64,
}

impl SummaryStats {
    /// Scale-free numeric encoding with entries of order one.
    pub fn numeric(&self) -> [f64; N_SUMMARY_FEATURES] {
        let zone = match self.summary.rsi_zone {
            RsiZone::Oversold => -1.0,
            RsiZone::Neutral => 0.0,
            RsiZone::Overbought => 1.0,
        };
        let vol_change = match self.summary.volatility_change {
            VolatilityChange::Increasing => 1.0,
            VolatilityChange::Decreasing => -1.0,
            VolatilityChange::Stable => 0.0,
        };
        let per_vol = |x: f64, lim: f64| {
            if self.volatility > 0.0 {
                (x / self.volatility).clamp(-lim, lim)
            } else {
                0.0
            }
        };
        [
            per_vol(self.delta, 5.0),
            per_vol(self.amplitude, 10.0),
            self.volume_ratio.max(1e-6).ln(),
            100.0 * self.volatility,
            100.0 * self.atr / self.close,
            self.ma_order.sign(),
            (self.rsi - 50.0) / 50.0,
            10.0 * self.band_width_ratio,
            zone,
            vol_change,
        ]
    }
}

/// Series-level indicator cache so that many windows can share one pass.
#[derive(Debug, Clone)]
pub struct FeatureSource<'a> {
    bars: &'a [Bar],
    ma10: IndicatorColumn,
    ma20: IndicatorColumn,
    ma100: IndicatorColumn,
    rsi14: IndicatorColumn,
    boll: super::Bands,
    kdj: super::Kdj,
    atr14: Option<IndicatorColumn>,
}

impl<'a> FeatureSource<'a> {
    pub fn new(bars: &'a [Bar]) -> Self {
        let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
        Self {
            bars,
            ma10: sma(&closes, 10).expect("positive period"),
            ma20: sma(&closes, 20).expect("positive period"),
            ma100: sma(&closes, 100).expect("positive period"),
            rsi14: rsi(&closes, 14).expect("positive period"),
            boll: bollinger(&closes, BOLL_PERIOD, BOLL_K).expect("period >= 2"),
            kdj: kdj(bars, 9).expect("positive period"),
            atr14: atr(bars, 14).ok(),
        }
    }

    pub fn bars(&self) -> &'a [Bar] {
        self.bars
    }

    fn check_t(&self, t: usize, needed: usize) -> Result<()> {
        if t >= self.bars.len() {
            return Err(IndicatorError::OutOfRange {
                t,
                len: self.bars.len(),
            });
        }
        if t < needed {
            return Err(IndicatorError::InsufficientHistory { t, needed });
        }
        Ok(())
    }

    /// The `k` rows ending at `t`, standardized with the window's own statistics.
    pub fn matrix(&self, t: usize, k: usize) -> Result<FeatureMatrix> {
        if k == 0 {
            return Err(IndicatorError::BadPeriod {
                name: "feature window",
                min: 1,
            });
        }
        self.check_t(t, k + SLOW_WARMUP)?;
        let b = self.bars;
        let start = t + 1 - k;
        let mean_vol = b[start..=t].iter().map(|x| x.volume).sum::<f64>() / k as f64;
        let def = |c: &IndicatorColumn, s: usize| c.get(s).expect("past warm-up");

        let mut raw = Vec::with_capacity(k * N_FEATURES);
        for s in start..=t {
            let prev = b[s - 1].close;
            raw.extend_from_slice(&[
                b[s].close,
                b[s].high,
                b[s].low,
                b[s].open,
                if mean_vol > 0.0 { b[s].volume / mean_vol } else { 0.0 },
                (b[s].close - prev) / prev,
                (b[s].high - b[s].low) / prev,
                def(&self.ma10, s),
                def(&self.ma20, s),
                def(&self.ma100, s),
                def(&self.rsi14, s),
                def(&self.boll.upper, s),
                def(&self.boll.middle, s),
                def(&self.boll.lower, s),
                def(&self.kdj.k, s),
                def(&self.kdj.d, s),
                def(&self.kdj.j, s),
            ]);
        }

        let mut mean = vec![0.0; N_FEATURES];
        let mut std = vec![0.0; N_FEATURES];
        let mut standardized = vec![0.0; k * N_FEATURES];
        for c in 0..N_FEATURES {
            let col = || (0..k).map(|r| raw[r * N_FEATURES + c]);
            let m0 = col().sum::<f64>() / k as f64;
            // Second pass removes the rounding residue of the first mean.
            let m = m0 + col().map(|x| x - m0).sum::<f64>() / k as f64;
            let sd = (col().map(|x| (x - m) * (x - m)).sum::<f64>() / k as f64).sqrt();
            mean[c] = m;
            std[c] = sd;
            let first = raw[c];
            if col().all(|x| x == first) || is_flat(sd, m) {
                continue;
            }
            for r in 0..k {
                standardized[r * N_FEATURES + c] = (raw[r * N_FEATURES + c] - m) / sd;
            }
        }
        Ok(FeatureMatrix {
            k,
            raw,
            standardized,
            mean,
            std,
        })
    }

    pub fn summary(&self, t: usize) -> Result<SummaryStats> {
        self.check_t(t, 100)?;
        let b = self.bars;
        let prev = b[t - 1].close;
        let mean_vol = b[t - VOL_RATIO_N..t].iter().map(|x| x.volume).sum::<f64>() / VOL_RATIO_N as f64;
        // A silent market has no meaningful ratio; report it as ordinary.
        let volume_ratio = if mean_vol > 0.0 { b[t].volume / mean_vol } else { 1.0 };

        let lr: Vec<f64> = (t - 99..=t).map(|s| (b[s].close / b[s - 1].close).ln()).collect();
        let lm = lr.iter().sum::<f64>() / lr.len() as f64;
        let volatility =
            (lr.iter().map(|x| (x - lm) * (x - lm)).sum::<f64>() / (lr.len() - 1) as f64).sqrt();

        let atr14 = self.atr14.as_ref().expect("length > 100");
        let atr_t = atr14.get(t).expect("past warm-up");
        let atr_mean = (t - 14..t).map(|s| atr14.get(s).expect("past warm-up")).sum::<f64>() / 14.0;
        let volatility_change = if atr_t > atr_mean * (1.0 + VOL_CHANGE_BAND) {
            VolatilityChange::Increasing
        } else if atr_t < atr_mean * (1.0 - VOL_CHANGE_BAND) {
            VolatilityChange::Decreasing
        } else {
            VolatilityChange::Stable
        };

        let (m10, m20, m100) = (
            self.ma10.get(t).expect("warm"),
            self.ma20.get(t).expect("warm"),
            self.ma100.get(t).expect("warm"),
        );
        let ma_order = if m10 > m20 && m20 > m100 {
            MaOrder::Bullish
        } else if m10 < m20 && m20 < m100 {
            MaOrder::Bearish
        } else {
            MaOrder::Mixed
        };
        let rsi_t = self.rsi14.get(t).expect("warm");
        let rsi_zone = if rsi_t < 30.0 {
            RsiZone::Oversold
        } else if rsi_t > 70.0 {
            RsiZone::Overbought
        } else {
            RsiZone::Neutral
        };
        let mid = self.boll.middle.get(t).expect("warm");
        let width = self.boll.upper.get(t).expect("warm") - self.boll.lower.get(t).expect("warm");

        Ok(SummaryStats {
            delta: (b[t].close - prev) / prev,
            amplitude: (b[t].high - b[t].low) / prev,
            volume_ratio,
            volatility,
            atr: atr_t,
            ma_order,
            rsi: rsi_t,
            band_width_ratio: width / mid,
            summary: MarketSummary {
                ma_state: ma_order,
                rsi_zone,
                volatility_change,
            },
            close: b[t].close,
        })
    }
}

/// Standardized `k`-row window ending at `t`.
pub fn feature_matrix(bars: &[Bar], t: usize, k: usize) -> Result<FeatureMatrix> {
    let end = (t + 1).min(bars.len());
    FeatureSource::new(&bars[..end]).matrix(t, k)
}

pub fn summary_stats(bars: &[Bar], t: usize) -> Result<SummaryStats> {
    let end = (t + 1).min(bars.len());
    FeatureSource::new(&bars[..end]).summary(t)
}
