//! The eleven rule strategies as per-bar state machines.
//!
//! Each algorithm splits into a signal extractor reading a prepared
//! indicator cache at bar `t` and a pure decision function mapping
//! `(state, signals, params)` to the next state and an order. Strategies
//! never look at bars after `t`.
//!
//! Sizing follows one rule everywhere: an entry allocates
//! `min(1, base + per_confirmation * k)` of equity where `k` counts the
//! satisfied confirmations listed for that algorithm, and each additional
//! layer allocates `initial / (layers + 1)`, capped so total exposure
//! never exceeds 1.

mod breakout;
mod params;
mod position;
mod reversal;
mod trend;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::{self, IndicatorColumn};
use crate::market_data::{Bar, BarSeries};

pub use breakout::{AtrBreakoutSignals, VolumeBreakoutSignals};
pub use params::{
    AtrBreakoutParams, BollParams, KdjParams, MaCrossParams, MomentumParams, RsiParams,
    SizingParams, StrategyParams, TurtleParams, VolumeBreakoutParams,
};
pub use reversal::{BollSignals, KdjSignals, RsiSignals};
pub use trend::{MaCrossSignals, MomentumSignals, TurtleSignals};

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action {action} does not belong to the {family} family")]
    WrongFamily { action: ActionId, family: Family },
    #[error("{action} is still warming up at bar {t}")]
    Warmup { action: ActionId, t: usize },
    #[error("bar {t} out of range for series of length {len}")]
    OutOfRange { t: usize, len: usize },
    #[error("invalid strategy parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T, E = StrategyError> = std::result::Result<T, E>;

/// The four expert families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Trend,
    Reversal,
    Breakout,
    Position,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Trend, Family::Reversal, Family::Breakout, Family::Position];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn actions(self) -> &'static [ActionId] {
        use ActionId::*;
        match self {
            Family::Trend => &[MaCross, Momentum, Turtle],
            Family::Reversal => &[Boll, Rsi, Kdj],
            Family::Breakout => &[Volume, Atr],
            Family::Position => &[LongOnly, ShortOnly, Cash],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Trend => "trend",
            Family::Reversal => "reversal",
            Family::Breakout => "breakout",
            Family::Position => "position",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| StrategyError::UnknownAction(s.to_string()))
    }
}

/// Actions `a1` to `a11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionId {
    MaCross,
    Momentum,
    Turtle,
    Boll,
    Rsi,
    Kdj,
    Volume,
    Atr,
    LongOnly,
    ShortOnly,
    Cash,
}

pub const N_ACTIONS: usize = 11;

impl ActionId {
    pub const ALL: [ActionId; N_ACTIONS] = [
        ActionId::MaCross,
        ActionId::Momentum,
        ActionId::Turtle,
        ActionId::Boll,
        ActionId::Rsi,
        ActionId::Kdj,
        ActionId::Volume,
        ActionId::Atr,
        ActionId::LongOnly,
        ActionId::ShortOnly,
        ActionId::Cash,
    ];

    /// Zero-based index, so `a1` is 0.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> String {
        format!("a{}", self.index() + 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionId::MaCross => "MACross",
            ActionId::Momentum => "Momentum",
            ActionId::Turtle => "Turtle",
            ActionId::Boll => "Boll",
            ActionId::Rsi => "RSI",
            ActionId::Kdj => "KDJ",
            ActionId::Volume => "Volume",
            ActionId::Atr => "ATR",
            ActionId::LongOnly => "LongOnly",
            ActionId::ShortOnly => "ShortOnly",
            ActionId::Cash => "Cash",
        }
    }

    pub fn family(self) -> Family {
        match self.index() {
            0..=2 => Family::Trend,
            3..=5 => Family::Reversal,
            6..=7 => Family::Breakout,
            _ => Family::Position,
        }
    }

    /// First bar index at which the action's signals are all defined.
    pub fn warmup(self, p: &StrategyParams) -> usize {
        let vw = p.sizing.volume_window;
        match self {
            ActionId::MaCross => {
                let c = &p.ma_cross;
                [
                    c.slow.max(c.fast) - 1 + p.sizing.divergence_bars,
                    c.atr_period,
                    5,
                    c.breakout_lookback,
                ]
                .into_iter()
                .max()
                .unwrap_or(0)
            }
            ActionId::Momentum => {
                let c = &p.momentum;
                let longest = c.short.max(c.lookback).max(c.long);
                (longest + c.accel_lag).max(c.atr_period).max(c.rsi_period).max(vw)
            }
            ActionId::Turtle => {
                let c = &p.turtle;
                c.entry_period.max(c.exit_period).max(c.atr_period).max(vw)
            }
            ActionId::Boll => {
                let c = &p.boll;
                (c.period - 1 + c.false_break_bars)
                    .max(c.atr_period)
                    .max(c.rsi_period)
                    .max(c.momentum_lag)
                    .max(vw)
            }
            ActionId::Rsi => {
                let c = &p.rsi;
                (c.period + c.divergence_lookback).max(c.atr_period).max(c.trend_lag).max(vw)
            }
            ActionId::Kdj => {
                let c = &p.kdj;
                (2 * c.period - 1).max(c.atr_period).max(c.momentum_lag).max(vw)
            }
            ActionId::Volume => {
                let c = &p.volume;
                c.price_window.max(c.ma_period - 1).max(c.atr_period).max(c.volume_window)
            }
            ActionId::Atr => {
                let c = &p.atr;
                (c.ma_period - 1 + c.slope_lag).max(c.atr_period).max(vw)
            }
            ActionId::LongOnly | ActionId::ShortOnly | ActionId::Cash => 0,
        }
    }
}

impl std::fmt::Display for ActionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ActionId {
    type Err = StrategyError;

    /// Accepts `a1`..`a11` or the action name, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        ActionId::ALL
            .into_iter()
            .find(|a| a.code().eq_ignore_ascii_case(s) || a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| StrategyError::UnknownAction(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verb {
    Buy,
    Sell,
    AddLayer,
    /// Closes part of the position; the fraction is a share of the position.
    Reduce,
    Close,
    Hold,
}

/// An order emitted by a strategy.
///
/// For `Buy`, `Sell` and `AddLayer` the fraction is of current equity; for
/// `Reduce` it is of the open position; otherwise it is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeAction {
    pub verb: Verb,
    pub fraction: f64,
    pub reason: &'static str,
}

impl TradeAction {
    pub const HOLD: TradeAction = TradeAction {
        verb: Verb::Hold,
        fraction: 0.0,
        reason: "",
    };

    pub fn buy(fraction: f64, reason: &'static str) -> Self {
        Self { verb: Verb::Buy, fraction, reason }
    }

    pub fn sell(fraction: f64, reason: &'static str) -> Self {
        Self { verb: Verb::Sell, fraction, reason }
    }

    pub fn close(reason: &'static str) -> Self {
        Self { verb: Verb::Close, fraction: 0.0, reason }
    }
}

/// Position bookkeeping of one strategy instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyState {
    /// -1 short, 0 flat, +1 long.
    pub position: i8,
    pub layers: usize,
    pub entries: Vec<f64>,
    pub sizes: Vec<f64>,
    /// Latest stop level, if the algorithm uses one.
    pub stop: Option<f64>,
    /// Exit level fixed at entry (ATR breakout only).
    pub exit_level: Option<f64>,
    /// Bar of the most recent entry or added layer.
    pub entry_bar: Option<usize>,
    /// Indicator reading recorded at the most recent entry or layer.
    pub entry_signal: Option<f64>,
}

impl StrategyState {
    pub fn is_flat(&self) -> bool {
        self.position == 0
    }

    /// Checks the position/layer/entry consistency rules.
    pub fn check(&self, max_layers: usize) -> bool {
        let flat = self.position == 0;
        flat == (self.layers == 0)
            && flat == self.entries.is_empty()
            && self.entries.len() == self.layers
            && self.sizes.len() == self.layers
            && self.layers <= max_layers
            && self.position.abs() <= 1
    }

    /// Size-weighted mean entry price.
    pub fn avg_entry(&self) -> f64 {
        let total: f64 = self.sizes.iter().sum();
        self.entries.iter().zip(&self.sizes).map(|(e, s)| e * s).sum::<f64>() / total
    }

    pub fn last_entry(&self) -> f64 {
        *self.entries.last().expect("in position")
    }

    pub fn total_size(&self) -> f64 {
        self.sizes.iter().sum()
    }

    /// Next pyramid increment, or `None` once exposure is fully allocated.
    pub fn next_add_size(&self) -> Option<f64> {
        let s0 = *self.sizes.first()?;
        let size = (s0 / (self.layers as f64 + 1.0)).min(1.0 - self.total_size());
        (size > 1e-12).then_some(size)
    }

    /// Signed profit of the average entry at `price`.
    pub fn profit(&self, price: f64) -> f64 {
        let avg = self.avg_entry();
        self.position as f64 * (price - avg) / avg
    }
}

/// What a decision function wants to do at this bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Decision {
    Hold,
    Open {
        dir: i8,
        size: f64,
        reason: &'static str,
        stop: Option<f64>,
        exit: Option<f64>,
        signal: Option<f64>,
    },
    Add {
        size: f64,
        reason: &'static str,
        signal: Option<f64>,
    },
    /// Drops the most recent layer.
    Reduce { reason: &'static str },
    Close { reason: &'static str },
}

impl Decision {
    pub(crate) fn open(dir: i8, size: f64, reason: &'static str) -> Self {
        Decision::Open {
            dir,
            size,
            reason,
            stop: None,
            exit: None,
            signal: None,
        }
    }
}

/// Applies a decision, producing the next state and the order to execute.
pub(crate) fn apply(
    state: &StrategyState,
    decision: Decision,
    price: f64,
    t: usize,
) -> (StrategyState, TradeAction) {
    let mut next = state.clone();
    let action = match decision {
        Decision::Hold => TradeAction::HOLD,
        Decision::Open {
            dir,
            size,
            reason,
            stop,
            exit,
            signal,
        } => {
            next = StrategyState {
                position: dir,
                layers: 1,
                entries: vec![price],
                sizes: vec![size],
                stop,
                exit_level: exit,
                entry_bar: Some(t),
                entry_signal: signal,
            };
            if dir > 0 {
                TradeAction::buy(size, reason)
            } else {
                TradeAction::sell(size, reason)
            }
        }
        Decision::Add {
            size,
            reason,
            signal,
        } => {
            next.layers += 1;
            next.entries.push(price);
            next.sizes.push(size);
            next.entry_bar = Some(t);
            if signal.is_some() {
                next.entry_signal = signal;
            }
            TradeAction {
                verb: Verb::AddLayer,
                fraction: size,
                reason,
            }
        }
        Decision::Reduce { reason } => {
            let fraction = state.sizes.last().copied().unwrap_or(0.0) / state.total_size();
            next.layers -= 1;
            next.entries.pop();
            next.sizes.pop();
            TradeAction {
                verb: Verb::Reduce,
                fraction,
                reason,
            }
        }
        Decision::Close { reason } => {
            next = StrategyState::default();
            TradeAction::close(reason)
        }
    };
    (next, action)
}

/// Reads a defined value or reports warm-up.
pub(crate) fn need(v: Option<f64>, action: ActionId, t: usize) -> Result<f64> {
    v.ok_or(StrategyError::Warmup { action, t })
}

/// Relative change over `lag` bars.
pub(crate) fn change(xs: &[f64], t: usize, lag: usize) -> Option<f64> {
    (t >= lag).then(|| (xs[t] - xs[t - lag]) / xs[t - lag])
}

/// Count of true flags.
pub(crate) fn count(flags: &[bool]) -> usize {
    flags.iter().filter(|f| **f).count()
}

fn atr_column(bars: &[Bar], n: usize) -> IndicatorColumn {
    indicators::atr(bars, n).unwrap_or_else(|_| IndicatorColumn {
        name: format!("atr{n}"),
        values: vec![None; bars.len()],
    })
}

/// Volume over the mean of the previous `n` volumes; 1 when those are all zero.
fn volume_ratio(bars: &[Bar], n: usize) -> Vec<Option<f64>> {
    (0..bars.len())
        .map(|t| {
            (t >= n).then(|| {
                let mean = bars[t - n..t].iter().map(|b| b.volume).sum::<f64>() / n as f64;
                if mean > 0.0 {
                    bars[t].volume / mean
                } else {
                    1.0
                }
            })
        })
        .collect()
}

/// Indicator cache shared by all eleven actions over one series.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    bars: &'a [Bar],
    closes: Vec<f64>,
    params: StrategyParams,
    vol_ratio: Vec<Option<f64>>,
    ma_cross: trend::MaCrossCache,
    momentum: trend::MomentumCache,
    turtle: trend::TurtleCache,
    boll: reversal::BollCache,
    rsi: reversal::RsiCache,
    kdj: reversal::KdjCache,
    volume: breakout::VolumeCache,
    atr: breakout::AtrCache,
}

impl<'a> Prepared<'a> {
    pub fn new(bars: &'a [Bar], params: &StrategyParams) -> Result<Self> {
        params.validate()?;
        let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
        Ok(Self {
            bars,
            vol_ratio: volume_ratio(bars, params.sizing.volume_window),
            ma_cross: trend::MaCrossCache::new(bars, &closes, &params.ma_cross),
            momentum: trend::MomentumCache::new(bars, &closes, &params.momentum),
            turtle: trend::TurtleCache::new(bars, &params.turtle),
            boll: reversal::BollCache::new(bars, &closes, &params.boll),
            rsi: reversal::RsiCache::new(bars, &closes, &params.rsi),
            kdj: reversal::KdjCache::new(bars, &params.kdj),
            volume: breakout::VolumeCache::new(bars, &closes, &params.volume),
            atr: breakout::AtrCache::new(bars, &closes, &params.atr),
            closes,
            params: params.clone(),
        })
    }

    pub fn bars(&self) -> &'a [Bar] {
        self.bars
    }

    pub fn params(&self) -> &StrategyParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub(crate) fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub(crate) fn vol_ratio(&self, action: ActionId, t: usize) -> Result<f64> {
        need(self.vol_ratio[t], action, t)
    }

    /// Advances `action` by one bar.
    pub fn step(&self, action: ActionId, state: &StrategyState, t: usize) -> Result<(StrategyState, TradeAction)> {
        if t >= self.bars.len() {
            return Err(StrategyError::OutOfRange {
                t,
                len: self.bars.len(),
            });
        }
        let price = self.closes[t];
        let (decision, stop) = match action.family() {
            Family::Trend => trend::decide_at(self, action, state, t)?,
            Family::Reversal => reversal::decide_at(self, action, state, t)?,
            Family::Breakout => breakout::decide_at(self, action, state, t)?,
            Family::Position => (position::decide(action, state, &self.params.sizing), None),
        };
        let (mut next, order) = apply(state, decision, price, t);
        // Dynamic stops are refreshed while the position stays open.
        if stop.is_some() && !next.is_flat() && !matches!(decision, Decision::Open { .. }) {
            next.stop = stop;
        }
        Ok((next, order))
    }
}

fn family_step(
    family: Family,
    action: ActionId,
    state: &StrategyState,
    series: &BarSeries,
    t: usize,
    params: &StrategyParams,
) -> Result<(StrategyState, TradeAction)> {
    if action.family() != family {
        return Err(StrategyError::WrongFamily { action, family });
    }
    if t >= series.len() {
        return Err(StrategyError::OutOfRange { t, len: series.len() });
    }
    // Only the prefix up to `t` is visible to the strategy.
    let prepared = Prepared::new(&series.bars()[..=t], params)?;
    prepared.step(action, state, t)
}

/// One bar of a trend action (`a1`-`a3`).
pub fn trend_step(
    action: ActionId,
    state: &StrategyState,
    series: &BarSeries,
    t: usize,
    params: &StrategyParams,
) -> Result<(StrategyState, TradeAction)> {
    family_step(Family::Trend, action, state, series, t, params)
}

/// One bar of a reversal action (`a4`-`a6`).
pub fn reversal_step(
    action: ActionId,
    state: &StrategyState,
    series: &BarSeries,
    t: usize,
    params: &StrategyParams,
) -> Result<(StrategyState, TradeAction)> {
    family_step(Family::Reversal, action, state, series, t, params)
}

/// One bar of a breakout action (`a7`-`a8`).
pub fn breakout_step(
    action: ActionId,
    state: &StrategyState,
    series: &BarSeries,
    t: usize,
    params: &StrategyParams,
) -> Result<(StrategyState, TradeAction)> {
    family_step(Family::Breakout, action, state, series, t, params)
}

/// One bar of a position action (`a9`-`a11`).
pub fn position_step(
    action: ActionId,
    state: &StrategyState,
    series: &BarSeries,
    t: usize,
    params: &StrategyParams,
) -> Result<(StrategyState, TradeAction)> {
    family_step(Family::Position, action, state, series, t, params)
}

/// Largest layer count an action may reach.
pub fn max_layers(action: ActionId, p: &StrategyParams) -> usize {
    match action {
        ActionId::MaCross => p.ma_cross.max_layers,
        ActionId::Momentum => p.momentum.max_layers,
        ActionId::Turtle => p.turtle.max_units,
        ActionId::Boll => p.boll.max_layers,
        ActionId::Rsi => p.rsi.max_layers,
        ActionId::Kdj => p.kdj.max_layers,
        ActionId::Volume => p.volume.max_layers,
        ActionId::Atr => p.atr.max_layers,
        _ => 1,
    }
}
