//! Router, gradient and reward checks shared by the focused tests and the
//! acceptance run. Each panics on the first violation.

use moe_trader::backtest::aggregate;
use moe_trader::router::{
    random_weights, route, ExpertWeights, RouteContext, RouterMode, RouterObservation, RouterPolicy, N_EXPERTS,
    OBS_DIM,
};
use moe_trader::strategy::{ActionId, Family};
use moe_trader::training::{
    base_reward, clip_objective, expert_gradient, expert_objective, expert_update, group_reward,
    group_reward_from_probs, router_gradient, router_objective, ExpertPolicy, ExpertSample, RewardConfig,
    RouterSample,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn normal(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    scale * rng.sample::<f64, _>(StandardNormal)
}

pub fn random_obs(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> RouterObservation {
    RouterObservation((0..dim).map(|_| normal(rng, scale)).collect())
}

pub fn random_router(rng: &mut ChaCha8Rng, mode: RouterMode, dim: usize, scale: f64) -> RouterPolicy {
    let mut p = RouterPolicy::new(mode, dim, rng.random_range(0.5..2.0), rng.random()).unwrap();
    p.phi.iter_mut().for_each(|w| *w = normal(rng, scale));
    p.bias.iter_mut().for_each(|w| *w = normal(rng, scale));
    p
}

pub fn random_expert(rng: &mut ChaCha8Rng, family: Family, dim: usize, scale: f64) -> ExpertPolicy {
    let mut p = ExpertPolicy::new(family, dim);
    let flat: Vec<f64> = (0..p.n_params()).map(|_| normal(rng, scale)).collect();
    p.set_flat(&flat);
    p
}

/// Every mode yields simplex weights on `n` random observations, Uniform is
/// exactly a quarter each, and one-hot aggregation returns the chosen expert.
pub fn check_simplex_and_aggregation(n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for mode in RouterMode::ALL {
        let policy = random_router(&mut rng, mode, OBS_DIM, 1.0);
        for draw in 0..n as u64 {
            let obs = random_obs(&mut rng, OBS_DIM, 3.0);
            let history: [f64; N_EXPERTS] = std::array::from_fn(|_| normal(&mut rng, 0.1));
            let ctx = RouteContext { history: Some(&history), draw };
            let w = route(&policy, &obs, ctx).unwrap();
            let a = w.as_array();
            assert!(a.iter().all(|x| *x >= 0.0 && x.is_finite()), "{mode:?}: {a:?}");
            assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "{mode:?}: sum {}", a.iter().sum::<f64>());
            if mode == RouterMode::Uniform {
                assert_eq!(*a, [0.25; N_EXPERTS]);
            }
            if mode == RouterMode::BestExpert {
                let k = w.argmax();
                assert_eq!(aggregate(&w, &history).unwrap(), history[k]);
            }
        }
    }
    for k in 0..N_EXPERTS {
        let r: [f64; N_EXPERTS] = std::array::from_fn(|_| normal(&mut rng, 0.2));
        assert_eq!(aggregate(&ExpertWeights::one_hot(k), &r).unwrap(), r[k]);
    }
}

/// Per-expert means of `n` random draws sit within three standard errors of 1/4.
pub fn check_random_mean(n: u64) {
    for seed in [0u64, 7, 42] {
        let draws: Vec<[f64; N_EXPERTS]> = (0..n).map(|d| *random_weights(seed, d).as_array()).collect();
        for k in 0..N_EXPERTS {
            let xs: Vec<f64> = draws.iter().map(|w| w[k]).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            let se = sd / (n as f64).sqrt();
            assert!((m - 0.25).abs() <= 3.0 * se, "seed {seed} expert {k}: mean {m}, se {se}");
        }
        assert_eq!(random_weights(seed, 5), random_weights(seed, 5));
    }
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (a.abs() + b.abs()) + 1e-9
}

/// Router loss gradient against central differences on random batches.
pub fn check_router_gradient(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RewardConfig { c3: 0.05, ..RewardConfig::default() };
    let dim = 5;
    let policy = random_router(&mut rng, RouterMode::Dynamic, dim, 0.7);
    let batch: Vec<RouterSample> = (0..4)
        .map(|_| RouterSample {
            obs: random_obs(&mut rng, dim, 1.0),
            choice: rng.random_range(0..N_EXPERTS),
            reward: normal(&mut rng, 0.3),
            baseline: normal(&mut rng, 0.1),
        })
        .collect();
    let g = router_gradient(&policy, &batch, &cfg).unwrap();
    let analytic: Vec<f64> = g.phi.iter().chain(&g.bias).copied().collect();
    let h = 1e-6;
    for i in 0..analytic.len() {
        let eval = |delta: f64| {
            let mut p = policy.clone();
            if i < p.phi.len() {
                p.phi[i] += delta;
            } else {
                p.bias[i - p.phi.len()] += delta;
            }
            router_objective(&p, &batch, &cfg).unwrap().loss
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        assert!(rel_close(analytic[i], fd, 1e-4), "router param {i}: {} vs {fd}", analytic[i]);
    }
}

/// Expert objective gradient against central differences on random batches,
/// every family.
pub fn check_expert_gradient(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RewardConfig { c2: 0.05, ..RewardConfig::default() };
    let dim = 4;
    for family in Family::ALL {
        let policy = random_expert(&mut rng, family, dim, 0.5);
        let batch: Vec<ExpertSample> = (0..3)
            .map(|_| {
                let obs = random_obs(&mut rng, dim, 1.0);
                let acts = family.actions();
                let action = acts[rng.random_range(0..acts.len())];
                // Stay clear of the clip kinks at 1 +/- epsilon.
                let mut log_ratio: f64 = rng.random_range(-0.5..0.5);
                if ((log_ratio.exp() - 1.0).abs() - cfg.epsilon).abs() < 0.01 {
                    log_ratio += 0.05;
                }
                ExpertSample {
                    old_log_prob: policy.log_prob(&obs, action) - log_ratio,
                    ret: normal(&mut rng, 0.3),
                    advantage: normal(&mut rng, 0.5),
                    obs,
                    action,
                }
            })
            .collect();
        let analytic = expert_gradient(&policy, &batch, &cfg).unwrap();
        let base = policy.to_flat();
        let h = 1e-6;
        for i in 0..base.len() {
            let eval = |delta: f64| {
                let mut v = base.clone();
                v[i] += delta;
                let mut p = policy.clone();
                p.set_flat(&v);
                expert_objective(&p, &batch, &cfg).unwrap().objective
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!(rel_close(analytic[i], fd, 1e-4), "{family:?} param {i}: {} vs {fd}", analytic[i]);
        }
    }
}

/// The three worked clip cases, plus the norm-clipped step size.
pub fn check_clip_cases() {
    assert_eq!(clip_objective(1.0, 2.0, 0.15), 2.0);
    assert_eq!(clip_objective(2.0, 1.0, 0.15), 1.15);
    assert_eq!(clip_objective(0.5, -1.0, 0.15), -0.85);
    // Large advantages push the gradient norm far past the 0.5 cap.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let policy = random_expert(&mut rng, Family::Trend, 6, 0.1);
    let obs = random_obs(&mut rng, 6, 2.0);
    let batch = vec![ExpertSample {
        old_log_prob: policy.log_prob(&obs, ActionId::MaCross),
        action: ActionId::MaCross,
        ret: 50.0,
        advantage: 100.0,
        obs,
    }];
    let cfg = RewardConfig::default();
    let lr = 3e-5;
    let (_, loss) = expert_update(&policy, &batch, &cfg, lr).unwrap();
    assert!(loss.grad_norm > cfg.grad_clip);
    assert!((loss.update_norm - cfg.grad_clip * lr).abs() <= 1e-9, "{}", loss.update_norm);
}

/// Group reward vanishes under identical policies and scales with beta;
/// base reward is zero at the origin and isolates the drawdown penalty.
pub fn check_reward_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 6;
    for _ in 0..50 {
        let obs = random_obs(&mut rng, dim, 1.0);
        // Same parameters, different families: compare on the shared union space.
        let flat: Vec<f64> = {
            let p = random_expert(&mut rng, Family::Trend, dim, 0.5);
            p.to_flat()
        };
        let policies: Vec<ExpertPolicy> = Family::ALL
            .iter()
            .map(|_| {
                let mut p = ExpertPolicy::new(Family::Trend, dim);
                p.set_flat(&flat);
                p
            })
            .collect();
        for a in ActionId::ALL {
            for i in 0..N_EXPERTS {
                assert_eq!(group_reward(i, a, &policies, &obs, 0.1), 0.0);
            }
        }
        let probs: Vec<f64> = (0..N_EXPERTS).map(|_| rng.random_range(1e-6..1.0)).collect();
        let beta: f64 = rng.random_range(0.01..2.0);
        for i in 0..N_EXPERTS {
            let r1 = group_reward_from_probs(i, &probs, beta);
            let r2 = group_reward_from_probs(i, &probs, 2.0 * beta);
            let r3 = group_reward_from_probs(i, &probs, 3.0 * beta);
            assert!((r2 - 2.0 * r1).abs() <= 1e-12 * (1.0 + r1.abs()));
            assert!((r3 - 3.0 * r1).abs() <= 1e-12 * (1.0 + r1.abs()));
        }
    }
    let r = group_reward_from_probs(0, &[0.2, 0.1, 0.1, 0.1], 0.1);
    assert!((r - 0.1 * 2f64.ln()).abs() < 1e-15);
    let cfg = RewardConfig::default();
    assert_eq!(base_reward(0.0, 0.0, 0.0, &cfg), 0.0);
    for mdd in [0.0, 0.1, 0.5, 1.0] {
        assert_eq!(base_reward(0.0, 0.0, mdd, &cfg), -cfg.drawdown_penalty * mdd);
        let heavy = RewardConfig { drawdown_penalty: 2.5, ..cfg.clone() };
        assert_eq!(base_reward(0.0, 0.0, mdd, &heavy), -2.5 * mdd);
    }
}
