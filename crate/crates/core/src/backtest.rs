//! Portfolio accounting and deterministic strategy replay.
//!
//! Orders fill at the bar close, moved against the trader by the configured
//! slippage, and pay `fee_rate` on notional. Short positions hold negative
//! shares: selling a fraction `f` of equity opens `-f * equity / price`
//! shares and equity is always `cash + shares * price`.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{Bar, BarSeries};
use crate::metrics::{MetricReport, MetricsError};
use crate::router::ExpertWeights;
use crate::strategy::{
    max_layers, ActionId, Family, Prepared, StrategyError, StrategyParams, StrategyState,
    TradeAction, Verb,
};

/// Fractions below this are treated as no order.
const DUST: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("shorting is disabled")]
    ShortingDisallowed,
    #[error("order needs fraction {requested} but only {available} is available")]
    FractionTooLarge { requested: f64, available: f64 },
    #[error("fill price must be positive, got {0}")]
    BadPrice(f64),
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("equity fell to {equity} at bar {t}")]
    MarginBreach {
        t: usize,
        equity: f64,
        partial: Box<BacktestResult>,
    },
    #[error("invalid window {start}..{end} for series of length {len} (first usable bar {warmup})")]
    BadWindow {
        start: usize,
        end: usize,
        len: usize,
        warmup: usize,
    },
    #[error("weights are not on the simplex (sum {sum})")]
    OffSimplex { sum: f64 },
    #[error("invalid execution config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T, E = BacktestError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FillRule {
    #[default]
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionConfig {
    pub initial_cash: f64,
    pub fee_rate: f64,
    pub slippage: f64,
    pub fill: FillRule,
    pub allow_short: bool,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            initial_cash: 100_000.0,
            fee_rate: 0.0,
            slippage: 0.0,
            fill: FillRule::Close,
            allow_short: true,
        }
    }
}

impl ExecutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_cash > 0.0 && self.initial_cash.is_finite()) {
            return Err(BacktestError::InvalidConfig("initial_cash must be positive".into()));
        }
        if !(self.fee_rate >= 0.0 && self.fee_rate < 1.0) {
            return Err(BacktestError::InvalidConfig("fee_rate must lie in [0, 1)".into()));
        }
        if !(self.slippage >= 0.0 && self.slippage < 1.0) {
            return Err(BacktestError::InvalidConfig("slippage must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub cash: f64,
    /// Negative when short.
    pub shares: f64,
    pub price: f64,
}

impl Portfolio {
    pub fn new(cash: f64) -> Self {
        Self {
            cash,
            shares: 0.0,
            price: 0.0,
        }
    }

    pub fn equity(&self) -> f64 {
        self.cash + self.shares * self.price
    }

    pub fn mark(&mut self, price: f64) {
        self.price = price;
    }

    /// Largest buy fraction of equity that cash can pay for, fees included.
    pub fn max_buy_fraction(&self, cfg: &ExecutionConfig) -> f64 {
        let eq = self.equity();
        if eq <= 0.0 {
            return 0.0;
        }
        (self.cash / ((1.0 + cfg.fee_rate) * eq)).max(0.0)
    }
}

/// One executed order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fill {
    pub bar: usize,
    pub date: chrono::NaiveDate,
    pub verb: Verb,
    pub price: f64,
    /// Signed share change.
    pub shares: f64,
    pub fees: f64,
    pub reason: &'static str,
}

/// Trades `delta` shares at `price` moved by slippage; returns the fill price and fee.
fn trade(p: &mut Portfolio, delta: f64, price: f64, cfg: &ExecutionConfig) -> (f64, f64) {
    let exec = if delta > 0.0 {
        price * (1.0 + cfg.slippage)
    } else {
        price * (1.0 - cfg.slippage)
    };
    let notional = delta.abs() * exec;
    let fee = notional * cfg.fee_rate;
    p.shares += delta;
    p.cash -= delta * exec + fee;
    (exec, fee)
}

/// Applies one order at `price`, returning the new portfolio and the fill, if any.
pub fn apply_action(
    p: &Portfolio,
    action: &TradeAction,
    price: f64,
    cfg: &ExecutionConfig,
) -> Result<(Portfolio, Option<(f64, f64, f64)>)> {
    if !(price > 0.0 && price.is_finite()) {
        return Err(BacktestError::BadPrice(price));
    }
    let mut next = *p;
    next.mark(price);
    let equity = next.equity();
    let f = action.fraction;
    let invalid = |m: &str| Err(BacktestError::InvalidOrder(m.into()));
    let delta = match action.verb {
        Verb::Hold => return Ok((next, None)),
        Verb::Close => -next.shares,
        Verb::Reduce => {
            if !(f > 0.0 && f <= 1.0) {
                return invalid("reduce fraction must lie in (0, 1]");
            }
            -f * next.shares
        }
        Verb::Buy | Verb::Sell | Verb::AddLayer => {
            if !(f > 0.0 && f.is_finite()) {
                return invalid("order fraction must be positive");
            }
            let long = match action.verb {
                Verb::Buy => true,
                Verb::Sell => false,
                _ => next.shares >= 0.0,
            };
            if long {
                let available = next.max_buy_fraction(cfg);
                if f > available * (1.0 + 1e-12) {
                    return Err(BacktestError::FractionTooLarge {
                        requested: f,
                        available,
                    });
                }
                f * equity / (price * (1.0 + cfg.slippage))
            } else {
                let delta = -f * equity / (price * (1.0 - cfg.slippage));
                if !cfg.allow_short && next.shares + delta < -1e-9 * next.shares.abs().max(1.0) {
                    return Err(BacktestError::ShortingDisallowed);
                }
                delta
            }
        }
    };
    if delta == 0.0 {
        return Ok((next, None));
    }
    let (exec, fee) = trade(&mut next, delta, price, cfg);
    if action.verb == Verb::Close {
        // Avoid leaving float dust as a residual position.
        next.shares = 0.0;
    }
    Ok((next, Some((exec, delta, fee))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestResult {
    pub action: Option<ActionId>,
    /// First and one-past-last bar index simulated.
    pub start: usize,
    pub end: usize,
    pub equity: Vec<f64>,
    pub returns: Vec<f64>,
    pub trades: Vec<Fill>,
    pub metrics: Option<MetricReport>,
}

impl BacktestResult {
    pub fn total_return(&self) -> f64 {
        self.metrics.map_or(0.0, |m| m.total_return)
    }

    /// Equity curve as `bar,date,equity` CSV.
    pub fn equity_csv(&self, bars: &[Bar]) -> String {
        let mut out = String::from("bar,date,equity\n");
        for (i, e) in self.equity.iter().enumerate() {
            let t = self.start + i;
            out.push_str(&format!("{t},{},{}\n", bars[t].date, crate::report::fmt_num(*e)));
        }
        out
    }
}

/// Bar-by-bar executor shared by strategies and baselines.
pub(crate) struct Engine<'a> {
    bars: &'a [Bar],
    cfg: &'a ExecutionConfig,
    portfolio: Portfolio,
    start: usize,
    equity: Vec<f64>,
    trades: Vec<Fill>,
    action: Option<ActionId>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(bars: &'a [Bar], cfg: &'a ExecutionConfig, start: usize, action: Option<ActionId>) -> Self {
        Self {
            bars,
            cfg,
            portfolio: Portfolio::new(cfg.initial_cash),
            start,
            equity: Vec::new(),
            trades: Vec::new(),
            action,
        }
    }

    pub(crate) fn shares(&self) -> f64 {
        self.portfolio.shares
    }

    /// Executes an order at bar `t`, shrinking buys to what cash can pay for.
    pub(crate) fn execute(&mut self, t: usize, order: &TradeAction) -> Result<()> {
        let price = self.bars[t].close;
        let mut order = *order;
        let buying = matches!(order.verb, Verb::Buy)
            || (order.verb == Verb::AddLayer && self.portfolio.shares >= 0.0);
        if buying {
            let mut probe = self.portfolio;
            probe.mark(price);
            order.fraction = order.fraction.min(probe.max_buy_fraction(self.cfg));
            if order.fraction <= DUST {
                return Ok(());
            }
        }
        let (next, fill) = apply_action(&self.portfolio, &order, price, self.cfg)?;
        self.portfolio = next;
        if let Some((exec, shares, fees)) = fill {
            self.trades.push(Fill {
                bar: t,
                date: self.bars[t].date,
                verb: order.verb,
                price: exec,
                shares,
                fees,
                reason: order.reason,
            });
        }
        Ok(())
    }

    /// Marks equity at the close of `t`; non-positive equity aborts the run.
    pub(crate) fn mark(&mut self, t: usize) -> Result<()> {
        self.portfolio.mark(self.bars[t].close);
        let eq = self.portfolio.equity();
        self.equity.push(eq);
        if eq <= 0.0 {
            let partial = self.snapshot(t + 1);
            return Err(BacktestError::MarginBreach {
                t,
                equity: eq,
                partial: Box::new(partial),
            });
        }
        Ok(())
    }

    fn snapshot(&self, end: usize) -> BacktestResult {
        let metrics = if self.equity.iter().all(|e| *e > 0.0) {
            MetricReport::from_curve(&self.equity).ok()
        } else {
            None
        };
        BacktestResult {
            action: self.action,
            start: self.start,
            end,
            returns: crate::metrics::simple_returns(&self.equity),
            equity: self.equity.clone(),
            trades: self.trades.clone(),
            metrics,
        }
    }

    pub(crate) fn finish(self, end: usize) -> Result<BacktestResult> {
        let mut r = self.snapshot(end);
        r.metrics = Some(MetricReport::from_curve(&self.equity)?);
        Ok(r)
    }
}

fn check_window(window: &Range<usize>, len: usize, warmup: usize) -> Result<()> {
    if window.start >= window.end || window.end > len || window.end - window.start < 2 || window.start < warmup {
        return Err(BacktestError::BadWindow {
            start: window.start,
            end: window.end,
            len,
            warmup,
        });
    }
    Ok(())
}

/// Replays `action` over bars `window` of a prepared series.
///
/// The strategy acts at every close except the last, where any open
/// position is closed.
pub fn run_prepared(
    ctx: &Prepared,
    action: ActionId,
    window: Range<usize>,
    cfg: &ExecutionConfig,
) -> Result<BacktestResult> {
    cfg.validate()?;
    check_window(&window, ctx.len(), action.warmup(ctx.params()))?;
    let mut engine = Engine::new(ctx.bars(), cfg, window.start, Some(action));
    let mut state = StrategyState::default();
    let cap = max_layers(action, ctx.params());
    let last = window.end - 1;
    for t in window.start..last {
        let (next, order) = ctx.step(action, &state, t)?;
        debug_assert!(next.check(cap));
        engine.execute(t, &order)?;
        engine.mark(t)?;
        state = next;
    }
    if engine.shares() != 0.0 {
        engine.execute(last, &TradeAction::close("end_of_window"))?;
    }
    engine.mark(last)?;
    engine.finish(window.end)
}

pub fn run_strategy(
    action: ActionId,
    series: &BarSeries,
    window: Range<usize>,
    params: &StrategyParams,
    cfg: &ExecutionConfig,
) -> Result<BacktestResult> {
    let end = window.end.min(series.len());
    let ctx = Prepared::new(&series.bars()[..end], params)?;
    run_prepared(&ctx, action, window, cfg)
}

/// Runs the sub-strategy the selector picks from `family`'s action set.
pub fn run_expert(
    family: Family,
    series: &BarSeries,
    window: Range<usize>,
    selector: impl FnOnce(&[ActionId]) -> ActionId,
    params: &StrategyParams,
    cfg: &ExecutionConfig,
) -> Result<BacktestResult> {
    let action = selector(family.actions());
    if action.family() != family {
        return Err(StrategyError::WrongFamily { action, family }.into());
    }
    run_strategy(action, series, window, params, cfg)
}

/// `sum_i w_i r_i` for weights on the simplex.
pub fn aggregate(weights: &ExpertWeights, returns: &[f64; 4]) -> Result<f64> {
    let w = weights.as_array();
    let sum: f64 = w.iter().sum();
    if w.iter().any(|x| *x < 0.0 || !x.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(BacktestError::OffSimplex { sum });
    }
    Ok(w.iter().zip(returns).map(|(w, r)| w * r).sum())
}
