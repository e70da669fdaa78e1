//! Mean-reversion experts: Bollinger, RSI and KDJ.
//!
//! Confirmations used for sizing (short side mirrored):
//! * Boll: RSI below the oversold level, negative short momentum, volume
//!   ratio above 1.2.
//! * RSI: RSI turning up, volume spike, bullish divergence (price at a new
//!   low while RSI holds above its low).
//! * KDJ: golden cross of K over D, volume ratio above 1.2, positive short
//!   momentum.
//!
//! Layers are added when at least two of the listed add signals hold.

use super::{
    change, count, need, ActionId, BollParams, Decision, KdjParams, Prepared, Result, RsiParams,
    SizingParams, StrategyError, StrategyState,
};
use crate::indicators::{bollinger, kdj, rsi, Bands, IndicatorColumn, Kdj};
use crate::market_data::Bar;

fn warmup(action: ActionId, t: usize) -> StrategyError {
    StrategyError::Warmup { action, t }
}

#[derive(Debug, Clone)]
pub(crate) struct BollCache {
    bands: Bands,
    atr: IndicatorColumn,
    rsi: IndicatorColumn,
}

impl BollCache {
    pub(crate) fn new(bars: &[Bar], closes: &[f64], p: &BollParams) -> Self {
        Self {
            bands: bollinger(closes, p.period, p.k).expect("validated period"),
            atr: super::atr_column(bars, p.atr_period),
            rsi: rsi(closes, p.rsi_period).expect("validated period"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BollSignals {
    pub price: f64,
    pub upper: f64,
    pub middle: f64,
    pub lower: f64,
    pub atr: f64,
    pub rsi: f64,
    /// Return over the momentum lag.
    pub momentum: f64,
    pub volume_ratio: f64,
    /// A close below the lower band within the false-break span, now back inside.
    pub false_break_down: bool,
    /// A close above the upper band within the false-break span, now back inside.
    pub false_break_up: bool,
}

impl BollSignals {
    pub fn at(ctx: &Prepared, t: usize) -> Result<Self> {
        let a = ActionId::Boll;
        let c = &ctx.boll;
        let p = &ctx.params.boll;
        let closes = ctx.closes();
        let upper = need(c.bands.upper.get(t), a, t)?;
        let lower = need(c.bands.lower.get(t), a, t)?;
        let span = p.false_break_bars;
        if t < span {
            return Err(warmup(a, t));
        }
        let (mut was_below, mut was_above) = (false, false);
        for s in t - span..t {
            was_below |= closes[s] < need(c.bands.lower.get(s), a, t)?;
            was_above |= closes[s] > need(c.bands.upper.get(s), a, t)?;
        }
        let price = closes[t];
        Ok(Self {
            price,
            upper,
            middle: need(c.bands.middle.get(t), a, t)?,
            lower,
            atr: need(c.atr.get(t), a, t)?,
            rsi: need(c.rsi.get(t), a, t)?,
            momentum: need(change(closes, t, p.momentum_lag), a, t)?,
            volume_ratio: ctx.vol_ratio(a, t)?,
            false_break_down: was_below && price >= lower,
            false_break_up: was_above && price <= upper,
        })
    }
}

pub(crate) fn boll(
    state: &StrategyState,
    s: &BollSignals,
    p: &BollParams,
    sizing: &SizingParams,
    t: usize,
) -> (Decision, Option<f64>) {
    let vol_ok = s.volume_ratio > p.volume_confirm;
    if state.is_flat() {
        if s.price < s.lower {
            let k = count(&[s.rsi < p.rsi_oversold, s.momentum < 0.0, vol_ok]);
            if k >= 1 {
                return (Decision::open(1, sizing.size(k), "band_touch"), None);
            }
        }
        if s.price > s.upper {
            let k = count(&[s.rsi > p.rsi_overbought, s.momentum > 0.0, vol_ok]);
            if k >= 1 {
                return (Decision::open(-1, sizing.size(k), "band_touch"), None);
            }
        }
        return (Decision::Hold, None);
    }

    let d = state.position as f64;
    let stop = state.avg_entry() - d * p.atr_mult * s.atr;
    let reached = if d > 0.0 { s.price >= s.middle } else { s.price <= s.middle };
    if reached && d * s.momentum < 0.0 {
        return (Decision::Close { reason: "target" }, Some(stop));
    }
    if d * (s.price - stop) < 0.0 {
        return (Decision::Close { reason: "stop" }, Some(stop));
    }
    if state.layers < p.max_layers {
        let more_extreme = if d > 0.0 {
            s.price < s.lower && s.price < state.last_entry()
        } else {
            s.price > s.upper && s.price > state.last_entry()
        };
        let waited = state.entry_bar.is_some_and(|b| t >= b + p.add_after_bars);
        let false_break = if d > 0.0 { s.false_break_down } else { s.false_break_up };
        if count(&[more_extreme, waited, false_break]) >= 2 {
            if let Some(size) = state.next_add_size() {
                return (Decision::Add { size, reason: "add_layer", signal: None }, Some(stop));
            }
        }
    }
    (Decision::Hold, Some(stop))
}

#[derive(Debug, Clone)]
pub(crate) struct RsiCache {
    rsi: IndicatorColumn,
    atr: IndicatorColumn,
}

impl RsiCache {
    pub(crate) fn new(bars: &[Bar], closes: &[f64], p: &RsiParams) -> Self {
        Self {
            rsi: rsi(closes, p.period).expect("validated period"),
            atr: super::atr_column(bars, p.atr_period),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsiSignals {
    pub price: f64,
    pub rsi: f64,
    /// One-bar change of RSI.
    pub rsi_momentum: f64,
    /// Return over the trend lag.
    pub trend: f64,
    pub volume_ratio: f64,
    pub bullish_divergence: bool,
    pub bearish_divergence: bool,
    pub atr: f64,
}

/// New price extreme over the lookback while the oscillator does not confirm it.
fn divergences(closes: &[f64], osc: &[f64], t: usize, lookback: usize) -> (bool, bool) {
    let span = t - lookback..t;
    let min_c = closes[span.clone()].iter().copied().fold(f64::INFINITY, f64::min);
    let max_c = closes[span.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_o = osc[..lookback].iter().copied().fold(f64::INFINITY, f64::min);
    let max_o = osc[..lookback].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let now = osc[lookback];
    (closes[t] < min_c && now > min_o, closes[t] > max_c && now < max_o)
}

/// Oscillator values over `[t - lookback, t]`.
fn window(col: &IndicatorColumn, a: ActionId, t: usize, lookback: usize) -> Result<Vec<f64>> {
    if t < lookback {
        return Err(warmup(a, t));
    }
    (t - lookback..=t).map(|s| need(col.get(s), a, t)).collect()
}

impl RsiSignals {
    pub fn at(ctx: &Prepared, t: usize) -> Result<Self> {
        let a = ActionId::Rsi;
        let c = &ctx.rsi;
        let p = &ctx.params.rsi;
        let closes = ctx.closes();
        let osc = window(&c.rsi, a, t, p.divergence_lookback)?;
        let (bullish_divergence, bearish_divergence) = divergences(closes, &osc, t, p.divergence_lookback);
        let now = osc[p.divergence_lookback];
        Ok(Self {
            price: closes[t],
            rsi: now,
            rsi_momentum: now - osc[p.divergence_lookback - 1],
            trend: need(change(closes, t, p.trend_lag), a, t)?,
            volume_ratio: ctx.vol_ratio(a, t)?,
            bullish_divergence,
            bearish_divergence,
            atr: need(c.atr.get(t), a, t)?,
        })
    }
}

pub(crate) fn rsi_reversion(
    state: &StrategyState,
    s: &RsiSignals,
    p: &RsiParams,
    sizing: &SizingParams,
) -> (Decision, Option<f64>) {
    let spike = s.volume_ratio > p.volume_spike;
    if state.is_flat() {
        if s.rsi < p.oversold {
            let k = count(&[s.rsi_momentum > 0.0, spike, s.bullish_divergence]);
            if k >= 1 {
                let mut open = Decision::open(1, sizing.size(k), "oversold");
                set_signal(&mut open, s.rsi);
                return (open, None);
            }
        }
        if s.rsi > p.overbought && s.trend < p.flat_trend {
            let k = count(&[s.rsi_momentum < 0.0, spike, s.bearish_divergence]);
            let mut open = Decision::open(-1, sizing.size(k), "overbought");
            set_signal(&mut open, s.rsi);
            return (open, None);
        }
        return (Decision::Hold, None);
    }

    let d = state.position as f64;
    let stop = state.avg_entry() - d * p.atr_mult * s.atr;
    // Distance from neutral and profit level, measured in the trade direction.
    let from_neutral = d * (s.rsi - p.neutral);
    if from_neutral > 0.0 && d * s.rsi_momentum < 0.0 {
        return (Decision::Close { reason: "mean_reversion" }, Some(stop));
    }
    if d * (s.price - stop) < 0.0 {
        return (Decision::Close { reason: "stop" }, Some(stop));
    }
    let profit_zone = if d > 0.0 { s.rsi > p.profit_rsi } else { s.rsi < 100.0 - p.profit_rsi };
    if state.profit(s.price) > p.profit_target && profit_zone {
        return (Decision::Close { reason: "profit_target" }, Some(stop));
    }
    if state.layers < p.max_layers {
        let last_rsi = state.entry_signal.unwrap_or(s.rsi);
        let signals = [
            d * (s.rsi - last_rsi) < 0.0,
            if d > 0.0 { s.bullish_divergence } else { s.bearish_divergence },
            d * (s.price - state.last_entry() * (1.0 - d * p.add_drop)) < 0.0,
        ];
        if count(&signals) >= 2 {
            if let Some(size) = state.next_add_size() {
                return (
                    Decision::Add { size, reason: "add_layer", signal: Some(s.rsi) },
                    Some(stop),
                );
            }
        }
    }
    (Decision::Hold, Some(stop))
}

fn set_signal(decision: &mut Decision, value: f64) {
    if let Decision::Open { signal, .. } = decision {
        *signal = Some(value);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct KdjCache {
    kdj: Kdj,
    atr: IndicatorColumn,
}

impl KdjCache {
    pub(crate) fn new(bars: &[Bar], p: &KdjParams) -> Self {
        Self {
            kdj: kdj(bars, p.period).expect("validated period"),
            atr: super::atr_column(bars, p.atr_period),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdjSignals {
    pub price: f64,
    pub k: f64,
    pub d: f64,
    pub j: f64,
    pub k_prev: f64,
    pub d_prev: f64,
    pub j_prev: f64,
    pub momentum: f64,
    pub volume_ratio: f64,
    pub bullish_divergence: bool,
    pub bearish_divergence: bool,
    pub atr: f64,
}

impl KdjSignals {
    pub fn at(ctx: &Prepared, t: usize) -> Result<Self> {
        let a = ActionId::Kdj;
        let c = &ctx.kdj;
        let p = &ctx.params.kdj;
        let closes = ctx.closes();
        let js = window(&c.kdj.j, a, t, p.period)?;
        let (bullish_divergence, bearish_divergence) = divergences(closes, &js, t, p.period);
        Ok(Self {
            price: closes[t],
            k: need(c.kdj.k.get(t), a, t)?,
            d: need(c.kdj.d.get(t), a, t)?,
            j: js[p.period],
            k_prev: need(c.kdj.k.get(t - 1), a, t)?,
            d_prev: need(c.kdj.d.get(t - 1), a, t)?,
            j_prev: js[p.period - 1],
            momentum: need(change(closes, t, p.momentum_lag), a, t)?,
            volume_ratio: ctx.vol_ratio(a, t)?,
            bullish_divergence,
            bearish_divergence,
            atr: need(c.atr.get(t), a, t)?,
        })
    }

    fn golden_cross(&self) -> bool {
        self.k_prev <= self.d_prev && self.k > self.d
    }

    fn death_cross(&self) -> bool {
        self.k_prev >= self.d_prev && self.k < self.d
    }
}

pub(crate) fn kdj_reversion(
    state: &StrategyState,
    s: &KdjSignals,
    p: &KdjParams,
    sizing: &SizingParams,
) -> (Decision, Option<f64>) {
    let vol_ok = s.volume_ratio > p.volume_confirm;
    if state.is_flat() {
        if s.j < p.j_buy || s.k < p.k_buy {
            let k = count(&[s.golden_cross(), vol_ok, s.momentum > 0.0]);
            if k >= 1 {
                let mut open = Decision::open(1, sizing.size(k), "oversold");
                set_signal(&mut open, s.j);
                return (open, None);
            }
        }
        if s.j > p.j_sell && s.k > p.k_sell {
            let k = count(&[s.death_cross(), vol_ok, s.momentum < 0.0]);
            if k >= 1 {
                let mut open = Decision::open(-1, sizing.size(k), "overbought");
                set_signal(&mut open, s.j);
                return (open, None);
            }
        }
        return (Decision::Hold, None);
    }

    let d = state.position as f64;
    let stop = state.avg_entry() - d * p.atr_mult * s.atr;
    // Mirror K, D and J around 50 for shorts so one rule set serves both sides.
    let o = |x: f64| if d > 0.0 { x } else { 100.0 - x };
    let against = if d > 0.0 { s.death_cross() } else { s.golden_cross() };
    if against && o(s.k) > p.cross_exit_k {
        return (Decision::Close { reason: "cross_exit" }, Some(stop));
    }
    if o(s.j) > p.j_exit && d * (s.j - s.j_prev) < -p.j_momentum_exit {
        return (Decision::Close { reason: "j_reversion" }, Some(stop));
    }
    if d * (s.price - stop) < 0.0 {
        return (Decision::Close { reason: "stop" }, Some(stop));
    }
    if state.profit(s.price) > p.profit_target && (o(s.j) > p.profit_level || o(s.k) > p.profit_level) {
        return (Decision::Close { reason: "profit_target" }, Some(stop));
    }
    if state.layers < p.max_layers {
        let last_j = state.entry_signal.unwrap_or(s.j);
        let signals = [
            d * (s.j - last_j) < 0.0,
            if d > 0.0 { s.golden_cross() } else { s.death_cross() },
            if d > 0.0 { s.bullish_divergence } else { s.bearish_divergence },
        ];
        if count(&signals) >= 2 {
            if let Some(size) = state.next_add_size() {
                return (
                    Decision::Add { size, reason: "add_layer", signal: Some(s.j) },
                    Some(stop),
                );
            }
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
        ActionId::Boll => boll(state, &BollSignals::at(ctx, t)?, &ctx.params.boll, sizing, t),
        ActionId::Rsi => rsi_reversion(state, &RsiSignals::at(ctx, t)?, &ctx.params.rsi, sizing),
        ActionId::Kdj => kdj_reversion(state, &KdjSignals::at(ctx, t)?, &ctx.params.kdj, sizing),
        other => {
            return Err(StrategyError::WrongFamily {
                action: other,
                family: super::Family::Reversal,
            })
        }
    })
}
