use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{clip_grad_norm, clip_objective, entropy, group_reward_from_probs, RewardConfig, Result, TrainingError, PROB_FLOOR};
use crate::router::RouterObservation;
use crate::strategy::{ActionId, Family, N_ACTIONS};

/// Linear softmax policy over all eleven actions with out-of-family actions
/// masked to probability zero, plus a linear value head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertPolicy {
    pub family: Family,
    pub dim: usize,
    /// Row-major `N_ACTIONS x dim`; masked rows stay zero.
    pub theta: Vec<f64>,
    pub bias: [f64; N_ACTIONS],
    pub value_w: Vec<f64>,
    pub value_b: f64,
}

impl ExpertPolicy {
    pub fn new(family: Family, dim: usize) -> Self {
        Self {
            family,
            dim,
            theta: vec![0.0; N_ACTIONS * dim],
            bias: [0.0; N_ACTIONS],
            value_w: vec![0.0; dim],
            value_b: 0.0,
        }
    }

    pub fn allows(&self, a: ActionId) -> bool {
        a.family() == self.family
    }

    /// Number of flat parameters.
    pub fn n_params(&self) -> usize {
        N_ACTIONS * self.dim + N_ACTIONS + self.dim + 1
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.theta);
        v.extend_from_slice(&self.bias);
        v.extend_from_slice(&self.value_w);
        v.push(self.value_b);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.n_params(), "flat parameter length");
        let (theta, rest) = v.split_at(N_ACTIONS * self.dim);
        let (bias, rest) = rest.split_at(N_ACTIONS);
        let (value_w, rest) = rest.split_at(self.dim);
        self.theta.copy_from_slice(theta);
        self.bias.copy_from_slice(bias);
        self.value_w.copy_from_slice(value_w);
        self.value_b = rest[0];
    }

    fn check(&self, obs: &RouterObservation) {
        assert_eq!(obs.dim(), self.dim, "observation dimension");
    }

    /// Action probabilities; masked entries are exactly zero.
    pub fn probs(&self, obs: &RouterObservation) -> [f64; N_ACTIONS] {
        self.check(obs);
        let x = obs.values();
        let mut z = [f64::NEG_INFINITY; N_ACTIONS];
        for a in self.family.actions() {
            let k = a.index();
            let row = &self.theta[k * self.dim..(k + 1) * self.dim];
            z[k] = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[k];
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p = [0.0; N_ACTIONS];
        let mut s = 0.0;
        for a in self.family.actions() {
            let k = a.index();
            p[k] = (z[k] - m).exp();
            s += p[k];
        }
        p.iter_mut().for_each(|q| *q /= s);
        p
    }

    pub fn log_prob(&self, obs: &RouterObservation, a: ActionId) -> f64 {
        self.probs(obs)[a.index()].max(PROB_FLOOR).ln()
    }

    pub fn value(&self, obs: &RouterObservation) -> f64 {
        self.check(obs);
        self.value_w.iter().zip(obs.values()).map(|(w, x)| w * x).sum::<f64>() + self.value_b
    }

    /// Samples an in-family action by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &RouterObservation, rng: &mut R) -> ActionId {
        let p = self.probs(obs);
        let u: f64 = rng.random();
        let actions = self.family.actions();
        let mut acc = 0.0;
        for a in actions {
            acc += p[a.index()];
            if u < acc {
                return *a;
            }
        }
        *actions.last().expect("families are non-empty")
    }

    /// Most probable in-family action, first on ties.
    pub fn greedy(&self, obs: &RouterObservation) -> ActionId {
        let p = self.probs(obs);
        let mut best = self.family.actions()[0];
        for a in self.family.actions() {
            if p[a.index()] > p[best.index()] {
                best = *a;
            }
        }
        best
    }
}

/// Group reward of expert `i` for `action` with the four policies on one observation.
pub fn group_reward(
    i: usize,
    action: ActionId,
    policies: &[ExpertPolicy],
    obs: &RouterObservation,
    beta: f64,
) -> f64 {
    let probs: Vec<f64> = policies.iter().map(|p| p.probs(obs)[action.index()]).collect();
    group_reward_from_probs(i, &probs, beta)
}

/// One collected decision of one expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSample {
    pub obs: RouterObservation,
    pub action: ActionId,
    pub old_log_prob: f64,
    /// Realized reward of the window.
    pub ret: f64,
    /// `ret` minus the value estimate at collection time.
    pub advantage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpertLoss {
    pub clip: f64,
    pub value: f64,
    pub entropy: f64,
    /// `clip - c1 value + c2 entropy`, the quantity being maximized.
    pub objective: f64,
    pub grad_norm: f64,
    pub update_norm: f64,
}

pub fn expert_objective(policy: &ExpertPolicy, batch: &[ExpertSample], cfg: &RewardConfig) -> Result<ExpertLoss> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut out = ExpertLoss::default();
    for s in batch {
        let p = policy.probs(&s.obs);
        let ratio = (p[s.action.index()].max(PROB_FLOOR).ln() - s.old_log_prob).exp();
        out.clip += clip_objective(ratio, s.advantage, cfg.epsilon) / n;
        out.value += super::value_loss(policy.value(&s.obs), s.ret) / n;
        out.entropy += entropy(&p) / n;
    }
    out.objective = out.clip - cfg.c1 * out.value + cfg.c2 * out.entropy;
    Ok(out)
}

/// Analytic gradient of the objective in flat parameter layout.
pub fn expert_gradient(policy: &ExpertPolicy, batch: &[ExpertSample], cfg: &RewardConfig) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let d = policy.dim;
    let n = batch.len() as f64;
    let mut g = vec![0.0; policy.n_params()];
    let bias_off = N_ACTIONS * d;
    let vw_off = bias_off + N_ACTIONS;
    let vb_off = vw_off + d;
    for s in batch {
        let x = s.obs.values();
        let p = policy.probs(&s.obs);
        let a = s.action.index();
        let ratio = (p[a].max(PROB_FLOOR).ln() - s.old_log_prob).exp();
        let clipped = ratio.clamp(1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
        // The surrogate follows the unclipped branch whenever it is the minimum.
        let surrogate_active = ratio * s.advantage <= clipped * s.advantage;
        let ent = entropy(&p);
        let mut dz = [0.0; N_ACTIONS];
        for act in policy.family.actions() {
            let k = act.index();
            let onehot = f64::from(u8::from(k == a));
            let mut v = 0.0;
            if surrogate_active {
                v += s.advantage * ratio * (onehot - p[k]);
            }
            if p[k] > 0.0 {
                v += cfg.c2 * (-p[k] * (p[k].ln() + ent));
            }
            dz[k] = v / n;
        }
        for act in policy.family.actions() {
            let k = act.index();
            g[bias_off + k] += dz[k];
            for (j, xj) in x.iter().enumerate() {
                g[k * d + j] += dz[k] * xj;
            }
        }
        let dv = -cfg.c1 * 2.0 * (policy.value(&s.obs) - s.ret) / n;
        for (j, xj) in x.iter().enumerate() {
            g[vw_off + j] += dv * xj;
        }
        g[vb_off] += dv;
    }
    Ok(g)
}

/// One clipped gradient-ascent step; non-finite gradients leave the policy untouched.
pub fn expert_update(
    policy: &ExpertPolicy,
    batch: &[ExpertSample],
    cfg: &RewardConfig,
    lr: f64,
) -> Result<(ExpertPolicy, ExpertLoss)> {
    let mut loss = expert_objective(policy, batch, cfg)?;
    let mut g = expert_gradient(policy, batch, cfg)?;
    if g.iter().any(|x| !x.is_finite()) || !loss.objective.is_finite() {
        return Err(TrainingError::NonFinite {
            what: "expert gradient",
            stage: "expert_update",
        });
    }
    loss.grad_norm = clip_grad_norm(&mut g, cfg.grad_clip);
    let mut flat = policy.to_flat();
    let mut sq = 0.0;
    for (w, gi) in flat.iter_mut().zip(&g) {
        let step = lr * gi;
        *w += step;
        sq += step * step;
    }
    loss.update_norm = sq.sqrt();
    let mut next = policy.clone();
    next.set_flat(&flat);
    Ok((next, loss))
}
