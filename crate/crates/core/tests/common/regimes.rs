//! Labeller agreement with the generator on the synthetic suite.

use moe_trader::experiment::{label_agreement, synthetic_suite, SuiteConfig, WindowSpec};

/// Agreement rate per seed over both series of the suite.
pub fn suite_agreement(seeds: std::ops::Range<u64>) -> Vec<(u64, usize, usize)> {
    let cfg = SuiteConfig::default();
    let w = WindowSpec::default();
    seeds
        .map(|seed| {
            let s = synthetic_suite(&cfg, seed).unwrap();
            let a = label_agreement(&s.train, &s.train_kinds, w.horizon, w.horizon).unwrap();
            let b = label_agreement(&s.test, &s.test_kinds, w.horizon, w.horizon).unwrap();
            (seed, a.matches + b.matches, a.windows + b.windows)
        })
        .collect()
}
