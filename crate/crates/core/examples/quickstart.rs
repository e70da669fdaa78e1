//! Backtests every rule strategy and the buy-and-hold baseline over one
//! 90-bar window of a generated series.
//!
//! cargo run --example quickstart

use moe_trader::backtest::{run_strategy, ExecutionConfig};
use moe_trader::baselines::{run_baseline, BaselineKind, BaselineParams};
use moe_trader::experiment::{synthetic_suite, SuiteConfig};
use moe_trader::metrics::pct;
use moe_trader::strategy::{ActionId, StrategyParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite = synthetic_suite(&SuiteConfig::default(), 7)?;
    let series = &suite.test;
    let window = 100..190;
    let params = StrategyParams::default();
    let cfg = ExecutionConfig::default();

    println!("{} bars {}..{}\n", series.asset(), window.start, window.end);
    println!("{:<10} {:>8} {:>8} {:>8} {:>7}", "strategy", "TR%", "SR", "MDD%", "trades");
    for action in ActionId::ALL {
        let r = run_strategy(action, series, window.clone(), &params, &cfg)?;
        let m = r.metrics.expect("completed runs carry metrics");
        let sr = m.sharpe.map_or("-".into(), |s| format!("{s:.3}"));
        println!(
            "{:<10} {:>8} {:>8} {:>8} {:>7}",
            action.name(),
            pct(m.total_return),
            sr,
            pct(m.max_drawdown),
            r.trades.len()
        );
    }
    let bh = run_baseline(BaselineKind::BuyHold, series, window, &BaselineParams::default(), &cfg)?;
    println!("{:<10} {:>8}", "B&H", pct(bh.total_return()));
    Ok(())
}
