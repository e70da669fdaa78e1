use serde::{Deserialize, Serialize};

use super::{clip_grad_norm, entropy, EmaBaseline, RewardConfig, Result, TrainingError, PROB_FLOOR};
use crate::router::{RouterGrad, RouterObservation, RouterPolicy, N_EXPERTS};

/// One router decision: the sampled dominant expert and what it earned.
///
/// `reward` is the aggregated return under the sampled one-hot allocation,
/// i.e. the dominant expert's reward. Its expectation under the policy is
/// the dense-weight aggregate, so the score-function term is unbiased for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterSample {
    pub obs: RouterObservation,
    pub choice: usize,
    pub reward: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RouterLoss {
    /// `-(R - b) log pi - c3 S`, averaged; the quantity being minimized.
    pub loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub update_norm: f64,
}

pub fn router_objective(policy: &RouterPolicy, batch: &[RouterSample], cfg: &RewardConfig) -> Result<RouterLoss> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut out = RouterLoss::default();
    for s in batch {
        let p = policy.dynamic_weights(&s.obs)?;
        let s_ent = entropy(&p);
        out.entropy += s_ent / n;
        out.loss += (-(s.reward - s.baseline) * p[s.choice].max(PROB_FLOOR).ln() - cfg.c3 * s_ent) / n;
    }
    Ok(out)
}

/// Gradient of the loss (descent direction is its negative).
pub fn router_gradient(policy: &RouterPolicy, batch: &[RouterSample], cfg: &RewardConfig) -> Result<RouterGrad> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut g = RouterGrad::zeros(policy.dim);
    for s in batch {
        if s.choice >= N_EXPERTS {
            return Err(TrainingError::InvalidConfig(format!("router choice {} out of range", s.choice)));
        }
        let lp = policy.log_prob_grad(&s.obs, s.choice)?;
        g.add_scaled(&lp, -(s.reward - s.baseline) / n);
        let eg = policy.entropy_grad(&s.obs)?;
        g.add_scaled(&eg, -cfg.c3 / n);
    }
    Ok(g)
}

/// One clipped descent step, then the baseline absorbs the batch rewards.
pub fn router_update(
    policy: &RouterPolicy,
    batch: &[RouterSample],
    baseline: &mut EmaBaseline,
    cfg: &RewardConfig,
    lr: f64,
) -> Result<(RouterPolicy, RouterLoss)> {
    let mut loss = router_objective(policy, batch, cfg)?;
    let g = router_gradient(policy, batch, cfg)?;
    if !g.is_finite() || !loss.loss.is_finite() {
        return Err(TrainingError::NonFinite {
            what: "router gradient",
            stage: "router_update",
        });
    }
    let mut flat: Vec<f64> = g.phi.iter().chain(&g.bias).copied().collect();
    loss.grad_norm = clip_grad_norm(&mut flat, cfg.grad_clip);
    let (phi, bias) = flat.split_at(g.phi.len());
    let step = RouterGrad {
        phi: phi.to_vec(),
        bias: [bias[0], bias[1], bias[2], bias[3]],
    };
    loss.update_norm = lr * step.norm();
    let mut next = policy.clone();
    next.apply_step(&step, -lr);
    for s in batch {
        baseline.update(s.reward);
    }
    Ok((next, loss))
}
