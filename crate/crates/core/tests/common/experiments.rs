//! Seeded experiments on the synthetic three-regime suite.

use moe_trader::experiment::{ablate_routing, desk_train_config, suite_tables, synthetic_suite, train_on_suite, ExperimentConfig, SuiteTables};
use moe_trader::router::RouterMode;
use moe_trader::training::{EvalRecord, TrainOutcome, WarmStartConfig};
use rayon::prelude::*;

pub const SEEDS: std::ops::Range<u64> = 0..10;

pub fn tables(seed: u64) -> SuiteTables {
    let cfg = ExperimentConfig::default();
    let suite = synthetic_suite(&cfg.suite, seed).unwrap();
    suite_tables(&suite, &cfg).unwrap()
}

pub fn rewards(out: &TrainOutcome) -> Vec<f64> {
    out.curve.iter().map(|r| r.reward).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Trailing `k`-episode mean ending at each episode.
pub fn rolling(xs: &[f64], k: usize) -> Vec<f64> {
    (0..xs.len()).map(|i| mean(&xs[(i + 1).saturating_sub(k)..=i])).collect()
}

pub struct SeedRun {
    pub seed: u64,
    pub first50: f64,
    pub last50: f64,
    /// Cold-start reward at the final episode, smoothed over ten episodes.
    pub cold_target: f64,
    /// First episode (1-based) at which the warm-started run's smoothed
    /// reward reaches `cold_target`.
    pub warm_reach: Option<usize>,
}

pub fn learning_runs() -> Vec<SeedRun> {
    SEEDS
        .into_par_iter()
        .map(|seed| {
            let t = tables(seed);
            let mut cfg = ExperimentConfig::default();
            cfg.train = desk_train_config();
            let cold = rewards(&train_on_suite(&t, &cfg, seed).unwrap());
            cfg.train.warm_start = Some(WarmStartConfig::default());
            let warm = rewards(&train_on_suite(&t, &cfg, seed).unwrap());
            let n = cold.len();
            let cold_target = rolling(&cold, 10)[n - 1];
            let warm_reach = rolling(&warm, 10).iter().position(|r| *r >= cold_target).map(|i| i + 1);
            SeedRun {
                seed,
                first50: mean(&cold[..50]),
                last50: mean(&cold[n - 50..]),
                cold_target,
                warm_reach,
            }
        })
        .collect()
}

/// Held-out evaluation of each routing mode, per seed, in `RouterMode::ALL` order.
pub fn routing_runs() -> Vec<Vec<EvalRecord>> {
    SEEDS
        .into_par_iter()
        .map(|seed| {
            let t = tables(seed);
            let cfg = ExperimentConfig::default();
            ablate_routing(t.train(), t.test(), &cfg, seed).unwrap()
        })
        .collect()
}

pub fn mode_index(m: RouterMode) -> usize {
    RouterMode::ALL.iter().position(|x| *x == m).unwrap()
}
