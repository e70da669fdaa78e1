//! Breakout experts: volume-confirmed channel breaks and ATR channels.
//!
//! Both fix their stop (and, for ATR, the exit level) on the entry bar.
//! Sizing confirmations: price on the right side of MA10, volume ratio above
//! 2, breakout distance above 0.5 ATR (volume); MA20 sloping with the trade,
//! volume ratio above 1.2, overshoot above 0.25 ATR (ATR channel).

use super::{
    count, need, ActionId, AtrBreakoutParams, Decision, Prepared, Result, SizingParams,
    StrategyError, StrategyState, VolumeBreakoutParams,
};
use crate::indicators::{donchian, sma, Channel, IndicatorColumn};
use crate::market_data::Bar;

/// Volume over the mean of the previous `n` volumes.
fn own_volume_ratio(bars: &[Bar], t: usize, n: usize) -> Option<f64> {
    (t >= n).then(|| {
        let mean = bars[t - n..t].iter().map(|b| b.volume).sum::<f64>() / n as f64;
        if mean > 0.0 {
            bars[t].volume / mean
        } else {
            1.0
        }
    })
}

#[derive(Debug, Clone)]
pub(crate) struct VolumeCache {
    channel: Channel,
    ma: IndicatorColumn,
    atr: IndicatorColumn,
}

impl VolumeCache {
    pub(crate) fn new(bars: &[Bar], closes: &[f64], p: &VolumeBreakoutParams) -> Self {
        Self {
            channel: donchian(bars, p.price_window).expect("validated period"),
            ma: sma(closes, p.ma_period).expect("validated period"),
            atr: super::atr_column(bars, p.atr_period),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeBreakoutSignals {
    pub price: f64,
    /// Highest high and lowest low of the price window, excluding `t`.
    pub recent_high: f64,
    pub recent_low: f64,
    pub volume_ratio: f64,
    pub ma: f64,
    pub atr: f64,
}

impl VolumeBreakoutSignals {
    pub fn at(ctx: &Prepared, t: usize) -> Result<Self> {
        let a = ActionId::Volume;
        let c = &ctx.volume;
        Ok(Self {
            price: ctx.closes()[t],
            recent_high: need(c.channel.upper.get(t), a, t)?,
            recent_low: need(c.channel.lower.get(t), a, t)?,
            volume_ratio: need(own_volume_ratio(ctx.bars(), t, ctx.params.volume.volume_window), a, t)?,
            ma: need(c.ma.get(t), a, t)?,
            atr: need(c.atr.get(t), a, t)?,
        })
    }
}

pub(crate) fn volume_breakout(
    state: &StrategyState,
    s: &VolumeBreakoutSignals,
    p: &VolumeBreakoutParams,
    sizing: &SizingParams,
) -> Decision {
    let strong_volume = s.volume_ratio > p.volume_strong;
    if state.is_flat() {
        if s.volume_ratio > p.volume_mult {
            let (dir, broke, dist, ma_side) = if s.price > s.recent_high {
                (1, true, s.price - s.recent_high, s.price > s.ma)
            } else if s.price < s.recent_low {
                (-1, true, s.recent_low - s.price, s.price < s.ma)
            } else {
                (0, false, 0.0, false)
            };
            if broke {
                let k = count(&[ma_side, strong_volume, dist > p.breakout_atr * s.atr]);
                let stop = s.price - dir as f64 * p.atr_mult * s.atr;
                return Decision::Open {
                    dir,
                    size: sizing.size(k),
                    reason: "volume_breakout",
                    stop: Some(stop),
                    exit: None,
                    signal: None,
                };
            }
        }
        return Decision::Hold;
    }

    let d = state.position as f64;
    let stop = state.stop.expect("stop fixed at entry");
    if d * (s.price - stop) < 0.0 {
        return Decision::Close { reason: "stop" };
    }
    if s.volume_ratio < p.exhaustion {
        return Decision::Close { reason: "volume_exhaustion" };
    }
    let extends = if d > 0.0 { s.price > s.recent_high } else { s.price < s.recent_low };
    if extends && s.volume_ratio > p.volume_hold && state.layers < p.max_layers {
        if let Some(size) = state.next_add_size() {
            return Decision::Add { size, reason: "pyramid", signal: None };
        }
    }
    Decision::Hold
}

#[derive(Debug, Clone)]
pub(crate) struct AtrCache {
    ma: IndicatorColumn,
    atr: IndicatorColumn,
}

impl AtrCache {
    pub(crate) fn new(bars: &[Bar], closes: &[f64], p: &AtrBreakoutParams) -> Self {
        Self {
            ma: sma(closes, p.ma_period).expect("validated period"),
            atr: super::atr_column(bars, p.atr_period),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtrBreakoutSignals {
    pub price: f64,
    pub ma: f64,
    pub ma_lagged: f64,
    pub atr: f64,
    pub volume_ratio: f64,
}

impl AtrBreakoutSignals {
    pub fn at(ctx: &Prepared, t: usize) -> Result<Self> {
        let a = ActionId::Atr;
        let c = &ctx.atr;
        let lag = ctx.params.atr.slope_lag;
        let lagged = t.checked_sub(lag).ok_or(StrategyError::Warmup { action: a, t })?;
        Ok(Self {
            price: ctx.closes()[t],
            ma: need(c.ma.get(t), a, t)?,
            ma_lagged: need(c.ma.get(lagged), a, t)?,
            atr: need(c.atr.get(t), a, t)?,
            volume_ratio: ctx.vol_ratio(a, t)?,
        })
    }

    pub fn upper(&self, p: &AtrBreakoutParams) -> f64 {
        self.ma + p.entry_mult * self.atr
    }

    pub fn lower(&self, p: &AtrBreakoutParams) -> f64 {
        self.ma - p.entry_mult * self.atr
    }
}

pub(crate) fn atr_breakout(
    state: &StrategyState,
    s: &AtrBreakoutSignals,
    p: &AtrBreakoutParams,
    sizing: &SizingParams,
) -> Decision {
    let (upper, lower) = (s.upper(p), s.lower(p));
    if state.is_flat() {
        let dir = if s.price > upper {
            1
        } else if s.price < lower {
            -1
        } else {
            return Decision::Hold;
        };
        let d = dir as f64;
        let channel = if dir > 0 { upper } else { lower };
        let k = count(&[
            d * (s.ma - s.ma_lagged) > 0.0,
            s.volume_ratio > p.volume_confirm,
            d * (s.price - channel) > p.overshoot_atr * s.atr,
        ]);
        return Decision::Open {
            dir,
            size: sizing.size(k),
            reason: "atr_breakout",
            stop: Some(s.price - d * p.stop_mult * s.atr),
            exit: Some(s.ma + d * p.exit_mult * s.atr),
            signal: None,
        };
    }

    let d = state.position as f64;
    let stop = state.stop.expect("stop fixed at entry");
    let exit = state.exit_level.expect("exit fixed at entry");
    if d * (s.price - stop) < 0.0 {
        return Decision::Close { reason: "stop" };
    }
    if d * (s.price - exit) < 0.0 {
        return Decision::Close { reason: "exit_level" };
    }
    let channel = if d > 0.0 { upper } else { lower };
    if d * (s.price - channel) > 0.0 && state.layers < p.max_layers {
        if let Some(size) = state.next_add_size() {
            return Decision::Add { size, reason: "pyramid", signal: None };
        }
    }
    Decision::Hold
}

pub(crate) fn decide_at(
    ctx: &Prepared,
    action: ActionId,
    state: &StrategyState,
    t: usize,
) -> Result<(Decision, Option<f64>)> {
    let sizing = &ctx.params.sizing;
    let decision = match action {
        ActionId::Volume => {
            volume_breakout(state, &VolumeBreakoutSignals::at(ctx, t)?, &ctx.params.volume, sizing)
        }
        ActionId::Atr => atr_breakout(state, &AtrBreakoutSignals::at(ctx, t)?, &ctx.params.atr, sizing),
        other => {
            return Err(StrategyError::WrongFamily {
                action: other,
                family: super::Family::Breakout,
            })
        }
    };
    Ok((decision, None))
}
