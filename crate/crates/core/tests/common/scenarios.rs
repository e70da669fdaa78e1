//! Hand-built price paths that walk each rule strategy through its branches,
//! and the library-side replay that is checked against the oracle.

use moe_trader::backtest::{run_strategy, ExecutionConfig};
use moe_trader::market_data::{Bar, BarSeries};
use moe_trader::strategy::{
    breakout_step, position_step, reversal_step, trend_step, ActionId, Family, StrategyParams, StrategyState,
};

use super::strategy_oracle::{self as oracle, Row};

pub struct Scenario {
    pub action: ActionId,
    pub file: &'static str,
    pub series: BarSeries,
}

/// Piecewise path: each segment is (bars, per-bar change), with an optional
/// alternating wiggle of the given amplitude on top.
fn path(start: f64, segments: &[(usize, f64, f64)]) -> Vec<f64> {
    let mut p = start;
    let mut out = vec![p];
    for &(n, drift, wiggle) in segments {
        for i in 0..n {
            let w = if i % 2 == 0 { wiggle } else { -wiggle };
            p *= 1.0 + drift + w;
            out.push(p);
        }
    }
    out
}

fn volumes(n: usize, spikes: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![1000.0; n];
    for &(t, x) in spikes {
        v[t] = x;
    }
    v
}

fn make(action: ActionId, file: &'static str, closes: Vec<f64>, spikes: &[(usize, f64)], spread: f64) -> Scenario {
    let vols = volumes(closes.len(), spikes);
    Scenario {
        action,
        file,
        series: super::series(&closes, &vols, spread),
    }
}

pub fn ma_cross() -> Scenario {
    let closes = path(100.0, &[(25, 0.0, 0.004), (12, 0.012, 0.0), (4, -0.002, 0.0), (8, 0.01, 0.0), (10, -0.03, 0.0), (10, -0.004, 0.0)]);
    make(ActionId::MaCross, "a1_ma_cross.tsv", closes, &[], 0.3)
}

pub fn momentum() -> Scenario {
    let closes = path(100.0, &[(28, 0.0, 0.003), (10, 0.008, 0.0), (6, 0.015, 0.0), (6, -0.004, 0.0), (12, -0.012, 0.0), (8, 0.0, 0.002)]);
    make(ActionId::Momentum, "a2_momentum.tsv", closes, &[(31, 1500.0), (40, 1800.0)], 0.3)
}

pub fn turtle() -> Scenario {
    let closes = path(100.0, &[(24, 0.0, 0.004), (14, 0.012, 0.0), (6, -0.025, 0.0), (9, -0.01, 0.0), (6, 0.02, 0.0)]);
    make(ActionId::Turtle, "a3_turtle.tsv", closes, &[], 0.2)
}

pub fn boll() -> Scenario {
    let closes = path(100.0, &[(24, 0.0, 0.004), (3, -0.02, 0.0), (6, -0.002, 0.0), (6, 0.01, 0.0), (4, -0.004, 0.0), (4, 0.02, 0.0), (12, -0.006, 0.0)]);
    make(ActionId::Boll, "a4_boll.tsv", closes, &[(26, 1500.0)], 0.2)
}

pub fn rsi() -> Scenario {
    let closes = path(100.0, &[(26, 0.0, 0.004), (8, -0.012, 0.0), (1, 0.003, 0.0), (4, -0.01, 0.0), (8, 0.012, 0.0), (2, -0.004, 0.0), (10, 0.012, 0.0), (6, -0.003, 0.0)]);
    make(ActionId::Rsi, "a5_rsi.tsv", closes, &[(35, 1700.0)], 0.2)
}

pub fn kdj() -> Scenario {
    let closes = path(100.0, &[(16, 0.0, 0.004), (4, -0.015, 0.0), (6, 0.01, 0.0), (3, -0.012, 0.0), (10, 0.008, 0.0)]);
    make(ActionId::Kdj, "a6_kdj.tsv", closes, &[(21, 1400.0)], 0.2)
}

pub fn volume() -> Scenario {
    let closes = path(100.0, &[(24, 0.0, 0.003), (1, 0.02, 0.0), (4, 0.006, 0.0), (3, 0.0, 0.002), (8, -0.001, 0.002), (1, -0.03, 0.0), (4, -0.008, 0.0), (5, 0.015, 0.0)]);
    let spikes = [(25, 2600.0), (26, 1500.0), (27, 1400.0), (28, 1300.0), (29, 400.0), (30, 300.0), (41, 3000.0), (42, 1800.0)];
    make(ActionId::Volume, "a7_volume.tsv", closes, &spikes, 0.2)
}

pub fn atr() -> Scenario {
    let closes = path(100.0, &[(27, 0.0, 0.002), (6, 0.012, 0.0), (5, -0.012, 0.0), (5, -0.015, 0.0), (6, 0.004, 0.0)]);
    make(ActionId::Atr, "a8_atr.tsv", closes, &[(28, 1500.0)], 0.2)
}

pub fn all() -> Vec<Scenario> {
    vec![ma_cross(), momentum(), turtle(), boll(), rsi(), kdj(), volume(), atr()]
}

pub fn oracle_trace(action: ActionId, bars: &[Bar], params: &StrategyParams, start: usize, cash: f64) -> Vec<Row> {
    let f = match action {
        ActionId::MaCross => oracle::ma_cross,
        ActionId::Momentum => oracle::momentum,
        ActionId::Turtle => oracle::turtle,
        ActionId::Boll => oracle::boll,
        ActionId::Rsi => oracle::rsi_reversion,
        ActionId::Kdj => oracle::kdj_reversion,
        ActionId::Volume => oracle::volume_breakout,
        ActionId::Atr => oracle::atr_breakout,
        other => panic!("no oracle for {other}"),
    };
    f(bars, params, start, cash)
}

/// Replays `action` through the public per-family step functions from its
/// first usable bar, with equity taken from the backtest engine.
pub fn library_trace(action: ActionId, series: &BarSeries, params: &StrategyParams, cfg: &ExecutionConfig) -> Vec<Row> {
    let step = match action.family() {
        Family::Trend => trend_step,
        Family::Reversal => reversal_step,
        Family::Breakout => breakout_step,
        Family::Position => position_step,
    };
    let start = action.warmup(params);
    let n = series.len();
    let result = run_strategy(action, series, start..n, params, cfg).unwrap();
    let mut state = StrategyState::default();
    let mut rows = Vec::new();
    for t in start..n {
        let (verb, fraction) = if t == n - 1 {
            let verb = if state.is_flat() { "Hold" } else { "Close" };
            state = StrategyState::default();
            (verb, 0.0)
        } else {
            let (next, order) = step(action, &state, series, t, params).unwrap();
            state = next;
            (verb_name(order.verb), order.fraction)
        };
        rows.push(Row {
            t,
            verb,
            fraction,
            position: state.position,
            layers: state.layers,
            stop: state.stop,
            equity: result.equity[t - start],
        });
    }
    rows
}

fn verb_name(v: moe_trader::strategy::Verb) -> &'static str {
    use moe_trader::strategy::Verb;
    match v {
        Verb::Buy => "Buy",
        Verb::Sell => "Sell",
        Verb::AddLayer => "AddLayer",
        Verb::Reduce => "Reduce",
        Verb::Close => "Close",
        Verb::Hold => "Hold",
    }
}
