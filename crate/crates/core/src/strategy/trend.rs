//! Trend followers: moving-average cross, blended momentum and Turtle.
//!
//! Confirmations used for sizing:
//! * MACross long: golden cross, MA gap above threshold, five-bar return above
//!   the momentum threshold. Short: death cross, MA gap, five-bar return below
//!   minus the momentum threshold.
//! * Momentum long: positive acceleration, RSI above 50, volume ratio above
//!   1.2. Short: negative acceleration, RSI below 40, volume ratio above 1.2.
//! * Turtle: volume ratio above 1.2, ATR below 2% of price.

use super::{
    change, count, need, ActionId, Decision, MaCrossParams, MomentumParams, Prepared, Result,
    SizingParams, StrategyState, TurtleParams,
};
use crate::indicators::{donchian, rsi, sma, IndicatorColumn};
use crate::market_data::Bar;

#[derive(Debug, Clone)]
pub(crate) struct MaCrossCache {
    fast: IndicatorColumn,
    slow: IndicatorColumn,
    atr: IndicatorColumn,
}

impl MaCrossCache {
    pub(crate) fn new(bars: &[Bar], closes: &[f64], p: &MaCrossParams) -> Self {
        Self {
            fast: sma(closes, p.fast).expect("validated period"),
            slow: sma(closes, p.slow).expect("validated period"),
            atr: super::atr_column(bars, p.atr_period),
        }
    }
}

/// Everything MACross looks at on one bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaCrossSignals {
    pub price: f64,
    pub fast: f64,
    pub slow: f64,
    pub fast_prev: f64,
    pub slow_prev: f64,
    pub atr: f64,
    /// Five-bar return.
    pub tau: f64,
    /// Relative MA gap narrowed on each of the last few bars.
    pub gap_shrinking: bool,
    /// Highest and lowest close over the breakout lookback, excluding `t`.
    pub recent_high: f64,
    pub recent_low: f64,
}

impl MaCrossSignals {
    pub fn at(ctx: &Prepared, t: usize) -> Result<Self> {
        let a = ActionId::MaCross;
        let c = &ctx.ma_cross;
        let p = &ctx.params.ma_cross;
        let closes = ctx.closes();
        let prev = t.checked_sub(1).ok_or(super::StrategyError::Warmup { action: a, t })?;
        let n = ctx.params.sizing.divergence_bars;
        if t < n || t < p.breakout_lookback {
            return Err(super::StrategyError::Warmup { action: a, t });
        }
        let gap = |s: usize| -> Result<f64> {
            let slow = need(c.slow.get(s), a, t)?;
            Ok((need(c.fast.get(s), a, t)? - slow).abs() / slow)
        };
        let mut gap_shrinking = true;
        for s in t + 1 - n..=t {
            gap_shrinking &= gap(s)? < gap(s - 1)?;
        }
        let lookback = &closes[t - p.breakout_lookback..t];
        Ok(Self {
            price: closes[t],
            fast: need(c.fast.get(t), a, t)?,
            slow: need(c.slow.get(t), a, t)?,
            fast_prev: need(c.fast.get(prev), a, t)?,
            slow_prev: need(c.slow.get(prev), a, t)?,
            atr: need(c.atr.get(t), a, t)?,
            tau: need(change(closes, t, 5), a, t)?,
            gap_shrinking,
            recent_high: lookback.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            recent_low: lookback.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }

    fn golden_cross(&self) -> bool {
        self.fast_prev <= self.slow_prev && self.fast > self.slow
    }

    fn death_cross(&self) -> bool {
        self.fast_prev >= self.slow_prev && self.fast < self.slow
    }
}

pub(crate) fn ma_cross(
    state: &StrategyState,
    s: &MaCrossSignals,
    p: &MaCrossParams,
    sizing: &SizingParams,
) -> (Decision, Option<f64>) {
    let gap = (s.fast - s.slow).abs() / s.slow;
    let strong = gap > p.trend_threshold;
    if state.is_flat() {
        let (golden, death) = (s.golden_cross(), s.death_cross());
        if golden || strong || s.tau > p.momentum_entry {
            let k = count(&[golden, strong, s.tau > p.momentum_entry]);
            return (Decision::open(1, sizing.size(k), "ma_entry"), None);
        }
        if death && s.tau < -p.exit_momentum {
            let k = count(&[death, strong, s.tau < -p.momentum_entry]);
            return (Decision::open(-1, sizing.size(k), "ma_entry"), None);
        }
        return (Decision::Hold, None);
    }

    let d = state.position as f64;
    let dtau = d * s.tau;
    let mut m = p.atr_mult;
    if dtau > 0.05 {
        m *= 1.5;
    } else if dtau > 0.02 {
        m *= 1.2;
    }
    let stop = state.avg_entry() - d * m * s.atr;
    if d * (s.price - stop) < 0.0 && dtau < -p.exit_momentum {
        return (Decision::Close { reason: "stop" }, Some(stop));
    }
    let against_cross = if d > 0.0 { s.death_cross() } else { s.golden_cross() };
    if against_cross && dtau < -p.exit_momentum {
        return (Decision::Close { reason: "cross_exit" }, Some(stop));
    }
    if state.layers < p.max_layers {
        let breakout = if d > 0.0 { s.price > s.recent_high } else { s.price < s.recent_low };
        let (lo, hi) = if d > 0.0 { (s.slow, s.fast) } else { (s.fast, s.slow) };
        let pullback = d * (s.fast - s.slow) > 0.0 && s.price > lo && s.price < hi;
        if count(&[breakout, s.gap_shrinking, pullback]) >= 2 {
            if let Some(size) = state.next_add_size() {
                return (Decision::Add { size, reason: "pyramid", signal: None }, Some(stop));
            }
        }
    }
    (Decision::Hold, Some(stop))
}

#[derive(Debug, Clone)]
pub(crate) struct MomentumCache {
    atr: IndicatorColumn,
    rsi: IndicatorColumn,
}

impl MomentumCache {
    pub(crate) fn new(bars: &[Bar], closes: &[f64], p: &MomentumParams) -> Self {
        Self {
            atr: super::atr_column(bars, p.atr_period),
            rsi: rsi(closes, p.rsi_period).expect("validated period"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumSignals {
    pub price: f64,
    pub momentum: f64,
    pub acceleration: f64,
    pub atr: f64,
    pub rsi: f64,
    pub volume_ratio: f64,
}

impl MomentumSignals {
    pub fn at(ctx: &Prepared, t: usize) -> Result<Self> {
        let a = ActionId::Momentum;
        let p = &ctx.params.momentum;
        let closes = ctx.closes();
        let blend = |s: usize| -> Result<f64> {
            Ok(0.5 * need(change(closes, s, p.lookback), a, t)?
                + 0.3 * need(change(closes, s, p.short), a, t)?
                + 0.2 * need(change(closes, s, p.long), a, t)?)
        };
        let momentum = blend(t)?;
        let lagged = t.checked_sub(p.accel_lag).ok_or(super::StrategyError::Warmup { action: a, t })?;
        Ok(Self {
            price: closes[t],
            momentum,
            acceleration: momentum - blend(lagged)?,
            atr: need(ctx.momentum.atr.get(t), a, t)?,
            rsi: need(ctx.momentum.rsi.get(t), a, t)?,
            volume_ratio: ctx.vol_ratio(a, t)?,
        })
    }
}

pub(crate) fn momentum(
    state: &StrategyState,
    s: &MomentumSignals,
    p: &MomentumParams,
    sizing: &SizingParams,
) -> (Decision, Option<f64>) {
    let theta = p.entry_threshold;
    let vol_ok = s.volume_ratio > p.volume_entry;
    if state.is_flat() {
        if s.momentum > theta {
            let k = count(&[s.acceleration > 0.0, s.rsi > p.rsi_long, vol_ok]);
            if k >= 1 {
                return (Decision::open(1, sizing.size(k), "momentum_entry"), None);
            }
        }
        if s.momentum < -theta && s.acceleration < 0.0 && s.rsi < p.rsi_short {
            let k = count(&[true, true, vol_ok]);
            return (Decision::open(-1, sizing.size(k), "momentum_entry"), None);
        }
        return (Decision::Hold, None);
    }

    let d = state.position as f64;
    let avg = state.avg_entry();
    let stop = avg - d * p.atr_mult * s.atr;
    if d * (s.price - stop) < 0.0 {
        return (Decision::Close { reason: "stop" }, Some(stop));
    }
    if d * s.momentum < p.exit_threshold {
        return (Decision::Close { reason: "momentum_fade" }, Some(stop));
    }
    if state.layers < p.max_layers {
        let layers = state.layers as f64;
        let signals = [
            d * s.momentum > theta * (1.0 + 0.5 * layers),
            d * (s.price - avg * (1.0 + d * 0.01 * layers)) > 0.0,
            d * s.acceleration > 0.5 * theta,
            s.volume_ratio > p.volume_add,
        ];
        if count(&signals) >= 2 {
            if let Some(size) = state.next_add_size() {
                return (Decision::Add { size, reason: "pyramid", signal: None }, Some(stop));
            }
        }
    }
    (Decision::Hold, Some(stop))
}

#[derive(Debug, Clone)]
pub(crate) struct TurtleCache {
    entry: crate::indicators::Channel,
    exit: crate::indicators::Channel,
    atr: IndicatorColumn,
}

impl TurtleCache {
    pub(crate) fn new(bars: &[Bar], p: &TurtleParams) -> Self {
        Self {
            entry: donchian(bars, p.entry_period).expect("validated period"),
            exit: donchian(bars, p.exit_period).expect("validated period"),
            atr: super::atr_column(bars, p.atr_period),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurtleSignals {
    pub price: f64,
    pub entry_high: f64,
    pub entry_low: f64,
    pub exit_high: f64,
    pub exit_low: f64,
    pub atr: f64,
    pub volume_ratio: f64,
}

impl TurtleSignals {
    pub fn at(ctx: &Prepared, t: usize) -> Result<Self> {
        let a = ActionId::Turtle;
        let c = &ctx.turtle;
        Ok(Self {
            price: ctx.closes()[t],
            entry_high: need(c.entry.upper.get(t), a, t)?,
            entry_low: need(c.entry.lower.get(t), a, t)?,
            exit_high: need(c.exit.upper.get(t), a, t)?,
            exit_low: need(c.exit.lower.get(t), a, t)?,
            atr: need(c.atr.get(t), a, t)?,
            volume_ratio: ctx.vol_ratio(a, t)?,
        })
    }
}

pub(crate) fn turtle(
    state: &StrategyState,
    s: &TurtleSignals,
    p: &TurtleParams,
    sizing: &SizingParams,
) -> (Decision, Option<f64>) {
    if state.is_flat() {
        let k = count(&[s.volume_ratio > p.volume_confirm, s.atr / s.price < p.calm_atr]);
        if s.price > s.entry_high {
            return (Decision::open(1, sizing.size(k), "channel_breakout"), None);
        }
        if s.price < s.entry_low {
            return (Decision::open(-1, sizing.size(k), "channel_breakout"), None);
        }
        return (Decision::Hold, None);
    }

    let d = state.position as f64;
    let last = state.last_entry();
    let stop = last - d * p.atr_mult * s.atr;
    let exit_breach = if d > 0.0 { s.price < s.exit_low } else { s.price > s.exit_high };
    if exit_breach {
        return (Decision::Close { reason: "exit_channel" }, Some(stop));
    }
    if d * (s.price - stop) < 0.0 {
        return (Decision::Close { reason: "stop" }, Some(stop));
    }
    if state.profit(s.price) > p.take_profit && state.layers > 1 {
        return (Decision::Reduce { reason: "take_profit" }, Some(stop));
    }
    if state.layers < p.max_units && d * (s.price - (last + d * p.add_step * s.atr)) > 0.0 {
        if let Some(size) = state.next_add_size() {
            return (Decision::Add { size, reason: "add_unit", signal: None }, Some(stop));
        }
    }
    (Decision::Hold, Some(stop))
}

pub(crate) fn decide_at(
    ctx: &Prepared,
    action: ActionId,
    state: &StrategyState,
    t: usize,
) -> Result<(Decision, Option<f64>)> {
    let sizing = &ctx.params.sizing;
    Ok(match action {
        ActionId::MaCross => ma_cross(state, &MaCrossSignals::at(ctx, t)?, &ctx.params.ma_cross, sizing),
        ActionId::Momentum => momentum(state, &MomentumSignals::at(ctx, t)?, &ctx.params.momentum, sizing),
        ActionId::Turtle => turtle(state, &TurtleSignals::at(ctx, t)?, &ctx.params.turtle, sizing),
        other => {
            return Err(super::StrategyError::WrongFamily {
                action: other,
                family: super::Family::Trend,
            })
        }
    })
}
