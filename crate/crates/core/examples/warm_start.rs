//! Compares a cold-started router with one pre-trained on regime labels.
//!
//! cargo run --release --example warm_start -- [seed]

use moe_trader::experiment::{suite_tables, synthetic_suite, train_on_suite, ExperimentConfig};
use moe_trader::training::WarmStartConfig;

fn smoothed(rewards: &[f64], end: usize) -> f64 {
    let w = &rewards[end.saturating_sub(10)..end];
    w.iter().sum::<f64>() / w.len() as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(1), |s| s.parse())?;
    let mut cfg = ExperimentConfig::default();
    let tables = suite_tables(&synthetic_suite(&cfg.suite, seed)?, &cfg)?;

    let cold = train_on_suite(&tables, &cfg, seed)?;
    cfg.train.warm_start = Some(WarmStartConfig::default());
    let warm = train_on_suite(&tables, &cfg, seed)?;
    if let Some(w) = &warm.warm {
        println!("regime head: {:.1}% training accuracy after {} epochs", 100.0 * w.accuracy, w.epochs);
    }

    let r = |o: &moe_trader::training::TrainOutcome| o.curve.iter().map(|e| e.reward).collect::<Vec<_>>();
    let (c, w) = (r(&cold), r(&warm));
    println!("\n{:>7} {:>10} {:>10}", "episode", "cold", "warm");
    for end in (10..=c.len()).step_by(20) {
        println!("{end:>7} {:>10.4} {:>10.4}", smoothed(&c, end), smoothed(&w, end));
    }
    let target = smoothed(&c, c.len());
    match (10..=w.len()).find(|e| smoothed(&w, *e) >= target) {
        Some(e) => println!("\nwarm start matches the cold run's final reward at episode {e}"),
        None => println!("\nwarm start never matches the cold run's final reward"),
    }
    Ok(())
}
