use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    base_reward, expert_update, group_reward, router_update, warm_start, EmaBaseline, ExpertLoss,
    ExpertPolicy, ExpertSample, Result, RewardConfig, RouterLoss, RouterSample, TrainingError,
    WarmStartConfig, WarmStartReport,
};
use crate::backtest::{run_prepared, ExecutionConfig};
use crate::indicators::FeatureSource;
use crate::market_data::{window_indices, BarSeries};
use crate::metrics::MetricReport;
use crate::regime::{RegimeClassifier, RegimeLabel};
use crate::router::{
    argmax, route, ExpertWeights, RouteContext, RouterMode, RouterObservation, RouterPolicy, N_EXPERTS,
    OBS_DIM,
};
use crate::strategy::{ActionId, Family, Prepared, StrategyParams, N_ACTIONS};

/// Backtest of one action over one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub metrics: MetricReport,
    /// Equity normalized to 1 at the decision bar.
    pub equity: Vec<f64>,
}

/// Everything the trainer needs about one window, independent of any policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    /// Last lookback bar; experts trade from its close to the end of the horizon.
    pub decision: usize,
    pub horizon: Range<usize>,
    pub obs: RouterObservation,
    /// Regime of the horizon, the quantity the warm start learns to predict.
    pub label: RegimeLabel,
    pub buy_hold: f64,
    pub actions: Vec<ActionOutcome>,
    /// Return of each action over the horizon-length span ending at the decision bar.
    pub trailing: [f64; N_ACTIONS],
}

impl WindowOutcome {
    pub fn reward(&self, a: ActionId, cfg: &RewardConfig) -> f64 {
        let m = &self.actions[a.index()].metrics;
        base_reward(m.total_return - self.buy_hold, m.sharpe_or_zero(), m.max_drawdown, cfg)
    }

    pub fn total_return(&self, a: ActionId) -> f64 {
        self.actions[a.index()].metrics.total_return
    }
}

/// Precomputed outcomes for every eligible window of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTable {
    pub asset: String,
    pub lookback: usize,
    pub horizon: usize,
    pub windows: Vec<WindowOutcome>,
}

impl WindowTable {
    /// Windows whose observation and trailing span are fully warmed up are kept.
    pub fn build(
        series: &BarSeries,
        params: &StrategyParams,
        exec: &ExecutionConfig,
        lookback: usize,
        horizon: usize,
        stride: usize,
    ) -> Result<Self> {
        let bars = series.bars();
        let ctx = Prepared::new(bars, params)?;
        let features = FeatureSource::new(bars);
        let regimes = RegimeClassifier::new(bars)?;
        let max_warmup = ActionId::ALL.iter().map(|a| a.warmup(params)).max().unwrap_or(0);
        let eligible: Vec<_> = window_indices(bars.len(), lookback, horizon, stride)
            .into_iter()
            .filter(|w| {
                let d = w.decision_index();
                d >= lookback + 99 && d >= horizon + max_warmup && w.horizon.start >= RegimeClassifier::warmup()
            })
            .collect();
        let windows = eligible
            .par_iter()
            .map(|w| -> Result<WindowOutcome> {
                let d = w.decision_index();
                let obs = RouterObservation::at(&features, d, lookback)?;
                let label = regimes.window(w.horizon.clone())?.label;
                let mut actions = Vec::with_capacity(N_ACTIONS);
                let mut trailing = [0.0; N_ACTIONS];
                for a in ActionId::ALL {
                    let r = run_prepared(&ctx, a, d..w.horizon.end, exec)?;
                    let e0 = r.equity[0];
                    actions.push(ActionOutcome {
                        metrics: r.metrics.expect("finished runs carry metrics"),
                        equity: r.equity.iter().map(|e| e / e0).collect(),
                    });
                    trailing[a.index()] = run_prepared(&ctx, a, d - horizon..d + 1, exec)?.total_return();
                }
                Ok(WindowOutcome {
                    decision: d,
                    horizon: w.horizon.clone(),
                    obs,
                    label,
                    buy_hold: actions[ActionId::LongOnly.index()].metrics.total_return,
                    actions,
                    trailing,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            asset: series.asset().to_string(),
            lookback,
            horizon,
            windows,
        })
    }

    pub fn labelled(&self) -> Vec<(RouterObservation, RegimeLabel)> {
        self.windows.iter().map(|w| (w.obs.clone(), w.label)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Windows per micro-batch.
    pub batch_size: usize,
    /// Micro-batches accumulated into one update.
    pub accumulation_steps: usize,
    pub expert_lr: f64,
    pub router_lr: f64,
    pub temperature: f64,
    pub router_mode: RouterMode,
    pub warm_start: Option<WarmStartConfig>,
    pub reward: RewardConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2500,
            batch_size: 16,
            accumulation_steps: 4,
            expert_lr: 3e-5,
            router_lr: 3e-5,
            temperature: 1.0,
            router_mode: RouterMode::Dynamic,
            warm_start: None,
            reward: RewardConfig::default(),
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.reward.validate()?;
        if self.batch_size == 0 || self.accumulation_steps == 0 {
            return Err(TrainingError::InvalidConfig("batch sizes must be positive".into()));
        }
        for (name, lr) in [("expert_lr", self.expert_lr), ("router_lr", self.router_lr)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(TrainingError::InvalidConfig(format!("{name} must be non-negative")));
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(TrainingError::InvalidConfig("temperature must be positive".into()));
        }
        Ok(())
    }

    fn update_size(&self) -> usize {
        self.batch_size * self.accumulation_steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub episode: usize,
    pub experts: Vec<ExpertPolicy>,
    pub router: RouterPolicy,
    pub baseline: EmaBaseline,
    pub reward: RewardConfig,
}

impl Checkpoint {
    pub fn new(cfg: &TrainConfig, dim: usize) -> Result<Self> {
        Ok(Self {
            version: crate::router::CHECKPOINT_VERSION,
            seed: cfg.seed,
            episode: 0,
            experts: Family::ALL.iter().map(|f| ExpertPolicy::new(*f, dim)).collect(),
            router: RouterPolicy::new(cfg.router_mode, dim, cfg.temperature, cfg.seed)?,
            baseline: EmaBaseline::new(cfg.reward.baseline_decay),
            reward: cfg.reward.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Weights the router would assign in `mode` for one window.
    pub fn weights(&self, mode: RouterMode, w: &WindowOutcome, draw: u64) -> Result<ExpertWeights> {
        let history: [f64; N_EXPERTS] =
            std::array::from_fn(|i| w.trailing[self.experts[i].greedy(&w.obs).index()]);
        let mut policy = self.router.clone();
        policy.mode = mode;
        Ok(route(&policy, &w.obs, RouteContext { history: Some(&history), draw })?)
    }
}

/// Per-episode learning-curve row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub asset: String,
    /// Mean over windows of the weight-averaged expert base reward.
    pub reward: f64,
    /// Mean over windows of the weight-averaged expert return.
    pub aggregated_return: f64,
    pub mean_weights: [f64; N_EXPERTS],
    /// Per expert, how often each of the eleven actions was sampled.
    pub action_counts: Vec<[usize; N_ACTIONS]>,
    pub expert_objective: [f64; N_EXPERTS],
    pub router_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: Vec<EpisodeRecord>,
    pub warm: Option<WarmStartReport>,
}

impl TrainOutcome {
    /// Learning curve as CSV.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("episode,asset,reward,aggregated_return,w_trend,w_reversal,w_breakout,w_position,router_loss\n");
        for r in &self.curve {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.episode,
                r.asset,
                crate::report::fmt_num(r.reward),
                crate::report::fmt_num(r.aggregated_return),
                crate::report::fmt_num(r.mean_weights[0]),
                crate::report::fmt_num(r.mean_weights[1]),
                crate::report::fmt_num(r.mean_weights[2]),
                crate::report::fmt_num(r.mean_weights[3]),
                crate::report::fmt_num(r.router_loss),
            ));
        }
        out
    }
}

const ROUTER_STREAM: u64 = N_EXPERTS as u64;

/// Independent random stream per (seed, episode, role).
fn stream(seed: u64, episode: usize, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ role.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(episode as u64);
    rng
}

struct Pending {
    experts: Vec<Vec<ExpertSample>>,
    router: Vec<RouterSample>,
}

impl Pending {
    fn new() -> Self {
        Self {
            experts: vec![Vec::new(); N_EXPERTS],
            router: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.experts[0].len()
    }
}

/// Regime-to-expert prior estimated from labelled windows.
///
/// Entry `[e][k]` is expert `e`'s mean base reward over windows labelled `k`
/// when it picks uniformly among its own actions, i.e. what the untrained
/// expert earns there. Each regime column is centred across experts and the
/// whole map is scaled to unit standard deviation. Regimes without windows
/// stay at zero.
pub fn empirical_prior(tables: &[WindowTable], cfg: &RewardConfig) -> [[f64; 3]; N_EXPERTS] {
    let mut sum = [[0.0; 3]; N_EXPERTS];
    let mut count = [0usize; 3];
    for w in tables.iter().flat_map(|t| &t.windows) {
        let k = w.label.index();
        count[k] += 1;
        for (e, f) in Family::ALL.iter().enumerate() {
            let acts = f.actions();
            sum[e][k] += acts.iter().map(|a| w.reward(*a, cfg)).sum::<f64>() / acts.len() as f64;
        }
    }
    let mut prior = [[0.0; 3]; N_EXPERTS];
    for k in 0..3 {
        if count[k] == 0 {
            continue;
        }
        let col: [f64; N_EXPERTS] = std::array::from_fn(|e| sum[e][k] / count[k] as f64);
        let mean = col.iter().sum::<f64>() / N_EXPERTS as f64;
        for e in 0..N_EXPERTS {
            prior[e][k] = col[e] - mean;
        }
    }
    let n = (N_EXPERTS * 3) as f64;
    let sd = (prior.iter().flatten().map(|x| x * x).sum::<f64>() / n).sqrt();
    if sd > 1e-12 {
        prior.iter_mut().flatten().for_each(|x| *x /= sd);
    }
    prior
}

/// Alternates window collection and clipped updates for `cfg.episodes`
/// episodes. Episode `e` is one chronological pass over the windows of
/// `tables[e % tables.len()]`.
pub fn train_loop(tables: &[WindowTable], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if tables.is_empty() || tables.iter().all(|t| t.windows.is_empty()) {
        return Err(TrainingError::InvalidConfig("no training windows".into()));
    }
    let dim = tables
        .iter()
        .flat_map(|t| t.windows.first())
        .map(|w| w.obs.dim())
        .next()
        .unwrap_or(OBS_DIM);
    let mut ck = Checkpoint::new(cfg, dim)?;
    let mut warm = None;
    if let (Some(wcfg), RouterMode::Dynamic) = (&cfg.warm_start, cfg.router_mode) {
        let data: Vec<_> = tables.iter().flat_map(|t| t.labelled()).collect();
        let prior = match wcfg.prior {
            Some(p) => p,
            None => empirical_prior(tables, &cfg.reward),
        };
        let (router, report) = warm_start(&ck.router, &data, &prior, wcfg)?;
        ck.router = router;
        warm = Some(report);
    }
    let rc = &cfg.reward;
    let mut curve = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let table = &tables[episode % tables.len()];
        if table.windows.is_empty() {
            continue;
        }
        let mut expert_rngs: Vec<_> = (0..N_EXPERTS).map(|i| stream(cfg.seed, episode, i as u64)).collect();
        let mut router_rng = stream(cfg.seed, episode, ROUTER_STREAM);
        let mut pending = Pending::new();
        let mut rec = EpisodeRecord {
            episode: episode + 1,
            asset: table.asset.clone(),
            reward: 0.0,
            aggregated_return: 0.0,
            mean_weights: [0.0; N_EXPERTS],
            action_counts: vec![[0; N_ACTIONS]; N_EXPERTS],
            expert_objective: [0.0; N_EXPERTS],
            router_loss: 0.0,
        };
        let mut updates = 0usize;
        let n = table.windows.len();
        for (k, w) in table.windows.iter().enumerate() {
            let acts: Vec<ActionId> = ck
                .experts
                .iter()
                .zip(expert_rngs.iter_mut())
                .map(|(p, rng)| p.sample(&w.obs, rng))
                .collect();
            let history: [f64; N_EXPERTS] = std::array::from_fn(|i| w.trailing[acts[i].index()]);
            let weights = route(
                &ck.router,
                &w.obs,
                RouteContext {
                    history: Some(&history),
                    draw: (episode * n + k) as u64,
                },
            )?;
            let wa = weights.as_array();
            let base: [f64; N_EXPERTS] = std::array::from_fn(|i| w.reward(acts[i], rc));
            for i in 0..N_EXPERTS {
                let r = base[i] + group_reward(i, acts[i], &ck.experts, &w.obs, rc.beta);
                let p = &ck.experts[i];
                pending.experts[i].push(ExpertSample {
                    obs: w.obs.clone(),
                    action: acts[i],
                    old_log_prob: p.log_prob(&w.obs, acts[i]),
                    ret: r,
                    advantage: r - p.value(&w.obs),
                });
                rec.action_counts[i][acts[i].index()] += 1;
                rec.mean_weights[i] += wa[i] / n as f64;
            }
            rec.reward += wa.iter().zip(&base).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            rec.aggregated_return +=
                (0..N_EXPERTS).map(|i| wa[i] * w.total_return(acts[i])).sum::<f64>() / n as f64;
            if cfg.router_mode == RouterMode::Dynamic {
                let choice = sample_index(wa, &mut router_rng);
                pending.router.push(RouterSample {
                    obs: w.obs.clone(),
                    choice,
                    reward: base[choice],
                    baseline: ck.baseline.get(),
                });
            }
            if pending.len() == cfg.update_size() || k + 1 == n {
                let last_good = ck.clone();
                let (eo, rl) = apply_updates(&mut ck, &pending, cfg).map_err(|e| TrainingError::Diverged {
                    episode: episode + 1,
                    reason: e.to_string(),
                    last_good: Box::new(last_good),
                })?;
                for i in 0..N_EXPERTS {
                    rec.expert_objective[i] += eo[i].objective;
                }
                rec.router_loss += rl.loss;
                updates += 1;
                pending = Pending::new();
            }
        }
        if updates > 0 {
            rec.expert_objective.iter_mut().for_each(|x| *x /= updates as f64);
            rec.router_loss /= updates as f64;
        }
        if !rec.reward.is_finite() {
            return Err(TrainingError::Diverged {
                episode: episode + 1,
                reason: "non-finite episode reward".into(),
                last_good: Box::new(ck),
            });
        }
        ck.episode = episode + 1;
        curve.push(rec);
    }
    Ok(TrainOutcome { checkpoint: ck, curve, warm })
}

fn apply_updates(ck: &mut Checkpoint, pending: &Pending, cfg: &TrainConfig) -> Result<([ExpertLoss; N_EXPERTS], RouterLoss)> {
    let mut losses = [ExpertLoss::default(); N_EXPERTS];
    let mut next = Vec::with_capacity(N_EXPERTS);
    for (i, batch) in pending.experts.iter().enumerate() {
        let (p, l) = expert_update(&ck.experts[i], batch, &cfg.reward, cfg.expert_lr)?;
        next.push(p);
        losses[i] = l;
    }
    let mut router_loss = RouterLoss::default();
    if !pending.router.is_empty() {
        let (r, l) = router_update(&ck.router, &pending.router, &mut ck.baseline, &cfg.reward, cfg.router_lr)?;
        ck.router = r;
        router_loss = l;
    }
    ck.experts = next;
    Ok((losses, router_loss))
}

fn sample_index(p: &[f64; N_EXPERTS], rng: &mut ChaCha8Rng) -> usize {
    use rand::Rng;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    argmax(p)
}

/// Out-of-sample result of one routing mode over consecutive windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub mode: RouterMode,
    pub metrics: MetricReport,
    pub mean_weights: [f64; N_EXPERTS],
    pub windows: usize,
    /// Chained per-bar equity of the weighted experts, starting at 1.
    pub equity: Vec<f64>,
    pub weights: Vec<[f64; N_EXPERTS]>,
}

/// Replays greedy experts under `mode` over the windows of `tables`, chaining
/// window equity curves. Windows should not overlap (stride = horizon).
pub fn evaluate(ck: &Checkpoint, tables: &[WindowTable], mode: RouterMode) -> Result<EvalRecord> {
    let mut equity = vec![1.0];
    let mut weights = Vec::new();
    let mut mean = [0.0; N_EXPERTS];
    let mut draw = 0u64;
    for table in tables {
        let mut last_end: Option<usize> = None;
        for w in &table.windows {
            if last_end.is_some_and(|e| w.decision + 1 < e) {
                continue;
            }
            let wt = ck.weights(mode, w, draw)?;
            draw += 1;
            let acts: Vec<ActionId> = ck.experts.iter().map(|p| p.greedy(&w.obs)).collect();
            let base = *equity.last().expect("non-empty");
            let len = w.actions[0].equity.len();
            for t in 1..len {
                let v: f64 = (0..N_EXPERTS)
                    .map(|i| wt.as_array()[i] * w.actions[acts[i].index()].equity[t])
                    .sum();
                equity.push(base * v);
            }
            for (m, x) in mean.iter_mut().zip(wt.as_array()) {
                *m += x;
            }
            weights.push(*wt.as_array());
            last_end = Some(w.horizon.end);
        }
    }
    if weights.is_empty() {
        return Err(TrainingError::InvalidConfig("no evaluation windows".into()));
    }
    let k = weights.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    let metrics = MetricReport::from_curve(&equity).map_err(|_| TrainingError::NonFinite {
        what: "evaluation equity",
        stage: "evaluate",
    })?;
    Ok(EvalRecord {
        mode,
        metrics,
        mean_weights: mean,
        windows: weights.len(),
        equity,
        weights,
    })
}
