//! Trains experts and a dynamic router on one synthetic seed, then replays
//! the held-out series under all four routing modes.
//!
//! cargo run --release --example routing_ablation -- [seed]

use moe_trader::experiment::{ablate_routing, suite_tables, synthetic_suite, ExperimentConfig};
use moe_trader::metrics::pct;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let cfg = ExperimentConfig::default();
    let suite = synthetic_suite(&cfg.suite, seed)?;
    let tables = suite_tables(&suite, &cfg)?;
    println!(
        "seed {seed}: {} training windows, {} evaluation windows, {} episodes\n",
        tables.train.windows.len(),
        tables.test.windows.len(),
        cfg.train.episodes
    );
    println!("{:<11} {:>8} {:>8} {:>8}   mean weights (trend reversal breakout position)", "mode", "TR%", "SR", "MDD%");
    for r in ablate_routing(tables.train(), tables.test(), &cfg, seed)? {
        let w = r.mean_weights.map(|x| format!("{x:.2}")).join(" ");
        let sr = r.metrics.sharpe.map_or("-".into(), |s| format!("{s:.3}"));
        println!(
            "{:<11} {:>8} {:>8} {:>8}   {w}",
            r.mode.name(),
            pct(r.metrics.total_return),
            sr,
            pct(r.metrics.max_drawdown)
        );
    }
    Ok(())
}
