//! Mechanical market-state labels.
//!
//! A day is an uptrend when MA5 > MA20, ADX > 15 and +DI > -DI, a downtrend
//! when all three comparisons flip, and consolidation otherwise. Windows take
//! the label held by at least half of their days, with an exact 50/50 split
//! between up and down falling back to consolidation.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::{adx_di, sma, Adx, IndicatorColumn, IndicatorError};
use crate::market_data::Bar;

pub const MA_FAST: usize = 5;
pub const MA_SLOW: usize = 20;
pub const ADX_PERIOD: usize = 14;
pub const ADX_THRESHOLD: f64 = 15.0;

#[derive(Debug, Error)]
pub enum RegimeError {
    #[error("day {t} precedes the classifier warm-up ({needed} bars)")]
    Warmup { t: usize, needed: usize },
    #[error("empty window")]
    EmptyWindow,
    #[error("{up} up and {down} down days exceed a {days}-day window")]
    CountOverflow { up: usize, down: usize, days: usize },
    #[error("window {start}..{end} exceeds series length {len}")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

pub type Result<T, E = RegimeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeLabel {
    Uptrend,
    Downtrend,
    Consolidation,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 3] = [Self::Uptrend, Self::Downtrend, Self::Consolidation];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Uptrend => "Uptrend",
            Self::Downtrend => "Downtrend",
            Self::Consolidation => "Consolidation",
        }
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Reported ADX strength bucket. The cut points are configurable defaults,
/// not part of the classification rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrendStrength {
    Strong,
    Medium,
    Weak,
}

pub fn trend_strength(adx: f64, strong: f64, medium: f64) -> TrendStrength {
    if adx >= strong {
        TrendStrength::Strong
    } else if adx >= medium {
        TrendStrength::Medium
    } else {
        TrendStrength::Weak
    }
}

/// The rule itself, on precomputed indicator values.
pub fn classify_values(ma_fast: f64, ma_slow: f64, adx: f64, plus_di: f64, minus_di: f64) -> RegimeLabel {
    if adx <= ADX_THRESHOLD {
        return RegimeLabel::Consolidation;
    }
    if ma_fast > ma_slow && plus_di > minus_di {
        RegimeLabel::Uptrend
    } else if ma_fast < ma_slow && plus_di < minus_di {
        RegimeLabel::Downtrend
    } else {
        RegimeLabel::Consolidation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLabel {
    pub label: RegimeLabel,
    pub up: usize,
    pub down: usize,
    pub days: usize,
}

/// Tally rule for a window given its day counts.
pub fn label_counts(up: usize, down: usize, days: usize) -> Result<WindowLabel> {
    if days == 0 {
        return Err(RegimeError::EmptyWindow);
    }
    if up + down > days {
        return Err(RegimeError::CountOverflow { up, down, days });
    }
    let half = |k: usize| 2 * k >= days;
    let label = match (half(up), half(down)) {
        (true, false) => RegimeLabel::Uptrend,
        (false, true) => RegimeLabel::Downtrend,
        _ => RegimeLabel::Consolidation,
    };
    Ok(WindowLabel { label, up, down, days })
}

/// Indicator cache for labelling many days of one series.
#[derive(Debug, Clone)]
pub struct RegimeClassifier {
    ma_fast: IndicatorColumn,
    ma_slow: IndicatorColumn,
    adx: Adx,
    len: usize,
}

impl RegimeClassifier {
    pub fn new(bars: &[Bar]) -> Result<Self> {
        let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
        Ok(Self {
            ma_fast: sma(&closes, MA_FAST)?,
            ma_slow: sma(&closes, MA_SLOW)?,
            adx: adx_di(bars, ADX_PERIOD)?,
            len: bars.len(),
        })
    }

    /// First day with every input defined.
    pub fn warmup() -> usize {
        (2 * ADX_PERIOD - 1).max(MA_SLOW - 1)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn day(&self, t: usize) -> Result<RegimeLabel> {
        let warm = || RegimeError::Warmup { t, needed: Self::warmup() };
        if t >= self.len {
            return Err(RegimeError::OutOfRange { start: t, end: t + 1, len: self.len });
        }
        Ok(classify_values(
            self.ma_fast.get(t).ok_or_else(warm)?,
            self.ma_slow.get(t).ok_or_else(warm)?,
            self.adx.adx.get(t).ok_or_else(warm)?,
            self.adx.plus_di.get(t).ok_or_else(warm)?,
            self.adx.minus_di.get(t).ok_or_else(warm)?,
        ))
    }

    pub fn window(&self, window: Range<usize>) -> Result<WindowLabel> {
        if window.start >= window.end {
            return Err(RegimeError::EmptyWindow);
        }
        if window.end > self.len {
            return Err(RegimeError::OutOfRange {
                start: window.start,
                end: window.end,
                len: self.len,
            });
        }
        let (mut up, mut down) = (0, 0);
        for t in window.clone() {
            match self.day(t)? {
                RegimeLabel::Uptrend => up += 1,
                RegimeLabel::Downtrend => down += 1,
                RegimeLabel::Consolidation => {}
            }
        }
        label_counts(up, down, window.len())
    }
}

/// Labels day `t` using bars up to and including `t`.
pub fn classify_day(bars: &[Bar], t: usize) -> Result<RegimeLabel> {
    if t >= bars.len() {
        return Err(RegimeError::OutOfRange { start: t, end: t + 1, len: bars.len() });
    }
    if t < RegimeClassifier::warmup() {
        return Err(RegimeError::Warmup { t, needed: RegimeClassifier::warmup() });
    }
    RegimeClassifier::new(&bars[..=t])?.day(t)
}

pub fn label_window(bars: &[Bar], window: Range<usize>) -> Result<WindowLabel> {
    if window.start >= window.end {
        return Err(RegimeError::EmptyWindow);
    }
    if window.end > bars.len() {
        return Err(RegimeError::OutOfRange {
            start: window.start,
            end: window.end,
            len: bars.len(),
        });
    }
    if window.start < RegimeClassifier::warmup() {
        return Err(RegimeError::Warmup {
            t: window.start,
            needed: RegimeClassifier::warmup(),
        });
    }
    RegimeClassifier::new(&bars[..window.end])?.window(window)
}
