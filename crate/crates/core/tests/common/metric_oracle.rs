//! Naive metric oracles and a random equity-curve generator.

use moe_trader::metrics::MetricReport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;

/// Quadratic drawdown: every (peak, trough) pair with the peak first.
pub fn oracle_mdd(v: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..v.len() {
        for j in i..v.len() {
            worst = worst.max(1.0 - v[j] / v[i]);
        }
    }
    worst
}

/// Sharpe through Welford's running moments.
pub fn oracle_sharpe(v: &[f64]) -> Option<f64> {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for w in v.windows(2) {
        let r = w[1] / w[0] - 1.0;
        n += 1.0;
        let d = r - mean;
        mean += d / n;
        m2 += d * (r - mean);
    }
    let sd = (m2 / (n - 1.0)).sqrt();
    (n >= 2.0 && sd > 0.0).then(|| mean / sd)
}

pub fn random_curve(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = rng.random_range(2..400);
    let vol = rng.random_range(0.001..0.05);
    let mut v = rng.random_range(1e3..1e6);
    let mut out = vec![v];
    for _ in 1..len {
        v *= 1.0 + rng.random_range(-vol..vol) + rng.random_range(-1e-4..1e-4);
        out.push(v);
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * (1.0 + b.abs())
}

/// Compares every metric on `count` seeded curves, panicking on a mismatch.
pub fn check_random_curves(seed: u64, count: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let v = random_curve(&mut rng);
        let m = MetricReport::from_curve(&v).unwrap();
        let tr = v[v.len() - 1] / v[0] - 1.0;
        assert!(close(m.total_return, tr), "curve {i}: tr {} vs {tr}", m.total_return);
        assert!(close(m.max_drawdown, oracle_mdd(&v)), "curve {i}: mdd");
        match (m.sharpe, oracle_sharpe(&v)) {
            (Some(a), Some(b)) => assert!(close(a, b), "curve {i}: sharpe {a} vs {b}"),
            (None, None) => {}
            (a, b) => panic!("curve {i}: sharpe definedness {a:?} vs {b:?}"),
        }
        assert_eq!(m.periods, v.len() - 1);
    }
}
