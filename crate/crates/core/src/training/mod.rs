//! Reward shaping and policy optimization for experts and router.
//!
//! Every window is a single-step episode: each expert samples one
//! sub-strategy, trades it over the horizon and receives
//! `base_reward + group_reward`. The advantage is that reward minus the
//! expert's value estimate. Experts take clipped-surrogate ascent steps and
//! the router takes REINFORCE steps against an exponential-moving-average
//! baseline. All updates are plain gradient steps with global norm clipping.

mod expert;
mod router_opt;
mod trainer;
mod warm;

pub use expert::{
    expert_gradient, expert_objective, expert_update, group_reward, ExpertLoss, ExpertPolicy, ExpertSample,
};
pub use router_opt::{router_gradient, router_objective, router_update, RouterLoss, RouterSample};
pub use trainer::{
    empirical_prior, evaluate, train_loop, ActionOutcome, Checkpoint, EpisodeRecord, EvalRecord, TrainConfig, TrainOutcome, WindowOutcome,
    WindowTable,
};
pub use warm::{warm_start, RegimeHead, WarmStartConfig, WarmStartReport, REGIME_PRIOR};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite {what} during {stage}")]
    NonFinite { what: &'static str, stage: &'static str },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no labelled windows")]
    NoLabels,
    #[error("training diverged at episode {episode}: {reason}")]
    Diverged {
        episode: usize,
        reason: String,
        last_good: Box<Checkpoint>,
    },
    #[error(transparent)]
    Router(#[from] crate::router::RouterError),
    #[error(transparent)]
    Backtest(#[from] crate::backtest::BacktestError),
    #[error(transparent)]
    Regime(#[from] crate::regime::RegimeError),
    #[error(transparent)]
    Strategy(#[from] crate::strategy::StrategyError),
    #[error(transparent)]
    Indicator(#[from] crate::indicators::IndicatorError),
}

pub type Result<T, E = TrainingError> = std::result::Result<T, E>;

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub alpha_r: f64,
    pub alpha_s: f64,
    pub beta: f64,
    pub drawdown_penalty: f64,
    /// `f(x) = return_cap * tanh(return_scale * x)`.
    pub return_cap: f64,
    pub return_scale: f64,
    /// `g(s) = sharpe_cap * tanh(sharpe_scale * s)`.
    pub sharpe_cap: f64,
    pub sharpe_scale: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub baseline_decay: f64,
    pub grad_clip: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha_r: 1.0,
            alpha_s: 0.5,
            beta: 0.1,
            drawdown_penalty: 1.0,
            return_cap: 1.0,
            return_scale: 5.0,
            sharpe_cap: 1.0,
            sharpe_scale: 0.5,
            c1: 0.5,
            c2: 0.01,
            c3: 0.01,
            gamma: 0.99,
            epsilon: 0.15,
            baseline_decay: 0.9,
            grad_clip: 0.5,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.alpha_r,
            self.alpha_s,
            self.beta,
            self.drawdown_penalty,
            self.return_cap,
            self.return_scale,
            self.sharpe_cap,
            self.sharpe_scale,
            self.c1,
            self.c2,
            self.c3,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(TrainingError::InvalidConfig("reward scales must be finite".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(TrainingError::InvalidConfig("gamma must lie in (0, 1)".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(TrainingError::InvalidConfig("epsilon must be positive".into()));
        }
        if !(self.baseline_decay >= 0.0 && self.baseline_decay < 1.0) {
            return Err(TrainingError::InvalidConfig("baseline_decay must lie in [0, 1)".into()));
        }
        if !(self.grad_clip > 0.0 && self.grad_clip.is_finite()) {
            return Err(TrainingError::InvalidConfig("grad_clip must be positive".into()));
        }
        Ok(())
    }

    pub fn smooth_return(&self, x: f64) -> f64 {
        self.return_cap * (self.return_scale * x).tanh()
    }

    pub fn smooth_sharpe(&self, s: f64) -> f64 {
        self.sharpe_cap * (self.sharpe_scale * s).tanh()
    }
}

/// `alpha_r f(excess) + alpha_s g(sharpe) - penalty * mdd`.
pub fn base_reward(tr_excess: f64, sharpe: f64, mdd: f64, cfg: &RewardConfig) -> f64 {
    cfg.alpha_r * cfg.smooth_return(tr_excess) + cfg.alpha_s * cfg.smooth_sharpe(sharpe)
        - cfg.drawdown_penalty * mdd
}

/// `beta (log p_i - log mean_{j != i} p_j)` with probabilities floored.
///
/// Evaluated as `-beta log mean_j (p_j / p_i)` so identical policies give
/// exactly zero: every ratio is then exactly one.
pub fn group_reward_from_probs(i: usize, probs: &[f64], beta: f64) -> f64 {
    assert!(probs.len() >= 2 && i < probs.len(), "need expert i and at least one other");
    let others = || probs.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, p)| *p);
    let k = (probs.len() - 1) as f64;
    let pi = probs[i].max(PROB_FLOOR);
    if others().sum::<f64>() / k < PROB_FLOOR {
        return beta * (pi.ln() - PROB_FLOOR.ln());
    }
    -beta * (others().map(|p| p / pi).sum::<f64>() / k).ln()
}

pub fn clip_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

pub fn value_loss(v: f64, g: f64) -> f64 {
    (v - g) * (v - g)
}

/// Shannon entropy in nats, `0 log 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Exponential moving average of rewards, seeded with the first value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaBaseline {
    pub value: Option<f64>,
    pub decay: f64,
}

impl EmaBaseline {
    pub fn new(decay: f64) -> Self {
        Self { value: None, decay }
    }

    pub fn get(&self) -> f64 {
        self.value.unwrap_or(0.0)
    }

    pub fn update(&mut self, r: f64) {
        self.value = Some(match self.value {
            None => r,
            Some(b) => self.decay * b + (1.0 - self.decay) * r,
        });
    }
}

/// Rescales `g` in place to at most `max_norm`; returns the pre-clip norm.
pub fn clip_grad_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let c = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= c);
    }
    norm
}
