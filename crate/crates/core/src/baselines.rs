//! Rule baselines expressed as daily position signs.
//!
//! Each rule maps bars up to `t` to a sign in {-1, 0, +1}; the backtest holds
//! that sign as the position, rebalancing whenever it changes. A zero sign
//! means cash. Buy-and-hold is always long: its textbook form
//! `sign(P[t+1] - P[t])` peeks at the next bar and would be an oracle.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{BacktestError, BacktestResult, Engine, ExecutionConfig};
use crate::indicators::{ema, kdj, rsi, sma, IndicatorError};
use crate::market_data::{Bar, BarSeries};
use crate::strategy::TradeAction;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("unknown baseline '{0}'")]
    UnknownKind(String),
    #[error("{kind} has no signal at bar {t}; first signal at bar {needed}")]
    Warmup { kind: BaselineKind, t: usize, needed: usize },
    #[error("bar {t} out of range for series of length {len}")]
    OutOfRange { t: usize, len: usize },
    #[error("invalid baseline parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
}

pub type Result<T, E = BaselineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    BuyHold,
    Macd,
    KdjRsi,
    Cr,
    Bbi,
    Wr,
    Bias,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        Self::BuyHold,
        Self::Macd,
        Self::KdjRsi,
        Self::Cr,
        Self::Bbi,
        Self::Wr,
        Self::Bias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::BuyHold => "B&H",
            Self::Macd => "MACD",
            Self::KdjRsi => "KDJ-RSI",
            Self::Cr => "CR",
            Self::Bbi => "BBI",
            Self::Wr => "WR",
            Self::Bias => "BIAS",
        }
    }

    /// First bar with a defined signal.
    pub fn warmup(self, p: &BaselineParams) -> usize {
        match self {
            Self::BuyHold | Self::Cr => 0,
            Self::Macd => p.macd_slow.max(p.macd_fast) - 1,
            Self::KdjRsi => (p.kdj_period - 1).max(p.rsi_period),
            Self::Bbi => p.bbi_periods.iter().max().copied().unwrap_or(1) - 1,
            Self::Wr => p.wr_period - 1,
            Self::Bias => p.bias_period - 1,
        }
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "bh" | "buyhold" | "buyandhold" => Ok(Self::BuyHold),
            "macd" => Ok(Self::Macd),
            "kdjrsi" => Ok(Self::KdjRsi),
            "cr" => Ok(Self::Cr),
            "bbi" => Ok(Self::Bbi),
            "wr" => Ok(Self::Wr),
            "bias" => Ok(Self::Bias),
            _ => Err(BaselineError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub kdj_period: usize,
    pub rsi_period: usize,
    pub wr_period: usize,
    pub bias_period: usize,
    pub bbi_periods: [usize; 4],
    /// When false, short signals are held as cash.
    pub allow_short: bool,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            macd_fast: 12,
            macd_slow: 26,
            kdj_period: 9,
            rsi_period: 14,
            wr_period: 14,
            bias_period: 20,
            bbi_periods: [3, 6, 12, 24],
            allow_short: false,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        let periods = [
            self.macd_fast,
            self.macd_slow,
            self.kdj_period,
            self.rsi_period,
            self.wr_period,
            self.bias_period,
        ];
        if periods.iter().chain(&self.bbi_periods).any(|p| *p == 0) {
            return Err(BaselineError::InvalidParams("periods must be positive".into()));
        }
        Ok(())
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// KDJ-RSI rule on indicator values.
pub fn kdj_rsi_rule(k: f64, rsi: f64) -> i8 {
    if k < 20.0 && rsi < 30.0 {
        1
    } else if k > 80.0 && rsi > 70.0 {
        -1
    } else {
        0
    }
}

/// Williams %R over the `n` bars ending at `t`; a flat range reads as -50.
pub fn williams_r(bars: &[Bar], t: usize, n: usize) -> f64 {
    let w = &bars[t + 1 - n..=t];
    let hh = w.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
    let ll = w.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
    if hh == ll {
        -50.0
    } else {
        -100.0 * (hh - bars[t].close) / (hh - ll)
    }
}

pub fn wr_rule(wr: f64) -> i8 {
    if wr < -80.0 {
        1
    } else if wr > -20.0 {
        -1
    } else {
        0
    }
}

/// Raw signs of one rule for every bar; `None` during warm-up.
pub fn baseline_signals(kind: BaselineKind, bars: &[Bar], p: &BaselineParams) -> Result<Vec<Option<i8>>> {
    p.validate()?;
    let n = bars.len();
    let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let warm = kind.warmup(p);
    let mut out = vec![None; n];
    if n <= warm {
        return Ok(out);
    }
    match kind {
        BaselineKind::BuyHold => out.iter_mut().for_each(|s| *s = Some(1)),
        BaselineKind::Cr => {
            for (s, b) in out.iter_mut().zip(bars) {
                *s = Some(sign(b.close - (b.high + b.low + b.open + b.close) / 4.0));
            }
        }
        BaselineKind::Macd => {
            let fast = ema(&closes, p.macd_fast)?;
            let slow = ema(&closes, p.macd_slow)?;
            for (t, s) in out.iter_mut().enumerate() {
                if let (Some(f), Some(sl)) = (fast.get(t), slow.get(t)) {
                    *s = Some(sign(f - sl));
                }
            }
        }
        BaselineKind::KdjRsi => {
            let k = kdj(bars, p.kdj_period)?;
            let r = rsi(&closes, p.rsi_period)?;
            for (t, s) in out.iter_mut().enumerate() {
                if let (Some(kv), Some(rv)) = (k.k.get(t), r.get(t)) {
                    *s = Some(kdj_rsi_rule(kv, rv));
                }
            }
        }
        BaselineKind::Bbi => {
            let mas = p
                .bbi_periods
                .iter()
                .map(|m| sma(&closes, *m))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            for (t, s) in out.iter_mut().enumerate() {
                let vals: Option<Vec<f64>> = mas.iter().map(|m| m.get(t)).collect();
                if let Some(v) = vals {
                    let bbi = v.iter().sum::<f64>() / v.len() as f64;
                    *s = Some(sign(closes[t] - bbi));
                }
            }
        }
        BaselineKind::Wr => {
            for (t, s) in out.iter_mut().enumerate().skip(warm) {
                *s = Some(wr_rule(williams_r(bars, t, p.wr_period)));
            }
        }
        BaselineKind::Bias => {
            let ma = sma(&closes, p.bias_period)?;
            for (t, s) in out.iter_mut().enumerate() {
                if let Some(m) = ma.get(t) {
                    *s = Some(sign(-(closes[t] - m) / m));
                }
            }
        }
    }
    Ok(out)
}

/// Sign of `kind` at bar `t` from bars `..=t` only.
pub fn baseline_signal(kind: BaselineKind, series: &BarSeries, t: usize, p: &BaselineParams) -> Result<i8> {
    let bars = series.bars();
    if t >= bars.len() {
        return Err(BaselineError::OutOfRange { t, len: bars.len() });
    }
    baseline_signals(kind, &bars[..=t], p)?[t].ok_or(BaselineError::Warmup {
        kind,
        t,
        needed: kind.warmup(p),
    })
}

/// Holds the rule's sign as the position over `window`, flattening at the end.
pub fn run_baseline(
    kind: BaselineKind,
    series: &BarSeries,
    window: Range<usize>,
    p: &BaselineParams,
    cfg: &ExecutionConfig,
) -> Result<BacktestResult> {
    cfg.validate()?;
    let bars = series.bars();
    let warm = kind.warmup(p);
    if window.start >= window.end || window.end > bars.len() || window.end - window.start < 2 || window.start < warm {
        return Err(BacktestError::BadWindow {
            start: window.start,
            end: window.end,
            len: bars.len(),
            warmup: warm,
        }
        .into());
    }
    let signals = baseline_signals(kind, &bars[..window.end], p)?;
    let mut engine = Engine::new(bars, cfg, window.start, None);
    let mut held = 0i8;
    let last = window.end - 1;
    for t in window.start..last {
        let raw = signals[t].expect("window starts after warm-up");
        let target = if raw < 0 && !p.allow_short { 0 } else { raw };
        if target != held {
            if held != 0 {
                engine.execute(t, &TradeAction::close("signal_change"))?;
            }
            match target {
                1 => engine.execute(t, &TradeAction::buy(1.0, "signal_long"))?,
                -1 => engine.execute(t, &TradeAction::sell(1.0, "signal_short"))?,
                _ => {}
            }
            held = target;
        }
        engine.mark(t)?;
    }
    if held != 0 {
        engine.execute(last, &TradeAction::close("end_of_window"))?;
    }
    engine.mark(last)?;
    Ok(engine.finish(window.end)?)
}
