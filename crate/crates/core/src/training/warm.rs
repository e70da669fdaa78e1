use serde::{Deserialize, Serialize};

use super::{Result, TrainingError};
use crate::regime::RegimeLabel;
use crate::router::{softmax, RouterError, RouterMode, RouterObservation, RouterPolicy, N_EXPERTS};

/// Hand-written expert prior per regime, rows (trend, reversal, breakout,
/// position) and columns (up, down, consolidation): uptrends favour trend
/// following, downtrends the short-capable position expert, ranges mean
/// reversion. The default instead estimates the map from training windows.
pub const REGIME_PRIOR: [[f64; 3]; N_EXPERTS] = [
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 1.0, 0.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WarmStartConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    /// Multiplier on the transferred logits.
    pub prior_scale: f64,
    /// Regime-to-expert logit map. `None` estimates it from the training
    /// windows (see [`super::empirical_prior`]); [`REGIME_PRIOR`] is a
    /// hand-written alternative.
    pub prior: Option<[[f64; 3]; N_EXPERTS]>,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 0.5,
            l2: 1e-3,
            prior_scale: 1.0,
            prior: None,
        }
    }
}

/// Multinomial logistic regression from observations to regime labels.
///
/// Inputs are z-scored with statistics taken from the fitting data, so
/// features on different scales train at comparable speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeHead {
    pub dim: usize,
    /// Row-major `3 x dim`, acting on standardized inputs.
    pub w: Vec<f64>,
    pub b: [f64; 3],
    pub mean: Vec<f64>,
    /// Per-feature divisor; constant features keep 1.
    pub scale: Vec<f64>,
}

impl RegimeHead {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            w: vec![0.0; 3 * dim],
            b: [0.0; 3],
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    fn standardize(&self, obs: &RouterObservation) -> Vec<f64> {
        obs.values()
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    /// Logit weights and biases on raw inputs, equivalent to the standardized ones.
    pub fn raw_logits(&self) -> (Vec<f64>, [f64; 3]) {
        let d = self.dim;
        let mut w = vec![0.0; 3 * d];
        let mut b = self.b;
        for k in 0..3 {
            for j in 0..d {
                w[k * d + j] = self.w[k * d + j] / self.scale[j];
                b[k] -= w[k * d + j] * self.mean[j];
            }
        }
        (w, b)
    }

    pub fn probs(&self, obs: &RouterObservation) -> [f64; 3] {
        let x = self.standardize(obs);
        let z: Vec<f64> = (0..3)
            .map(|k| self.w[k * self.dim..(k + 1) * self.dim].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + self.b[k])
            .collect();
        let p = softmax(&z);
        [p[0], p[1], p[2]]
    }

    pub fn predict(&self, obs: &RouterObservation) -> RegimeLabel {
        let p = self.probs(obs);
        RegimeLabel::from_index(crate::router::argmax(&p)).expect("three classes")
    }

    pub fn accuracy(&self, data: &[(RouterObservation, RegimeLabel)]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data.iter().filter(|(o, l)| self.predict(o) == *l).count();
        hits as f64 / data.len() as f64
    }

    pub fn cross_entropy(&self, data: &[(RouterObservation, RegimeLabel)]) -> f64 {
        let n = data.len().max(1) as f64;
        data.iter()
            .map(|(o, l)| -self.probs(o)[l.index()].max(super::PROB_FLOOR).ln())
            .sum::<f64>()
            / n
    }

    /// Re-estimates the input standardization, then runs full-batch gradient
    /// descent on mean cross-entropy plus an L2 penalty on `w`.
    pub fn fit(&mut self, data: &[(RouterObservation, RegimeLabel)], epochs: usize, lr: f64, l2: f64) {
        if data.is_empty() {
            return;
        }
        let n = data.len() as f64;
        let d = self.dim;
        for j in 0..d {
            let m = data.iter().map(|(o, _)| o.values()[j]).sum::<f64>() / n;
            let v = data.iter().map(|(o, _)| (o.values()[j] - m).powi(2)).sum::<f64>() / n;
            self.mean[j] = m;
            self.scale[j] = if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 };
        }
        let xs: Vec<Vec<f64>> = data.iter().map(|(o, _)| self.standardize(o)).collect();
        for _ in 0..epochs {
            let mut gw: Vec<f64> = self.w.iter().map(|w| l2 * w).collect();
            let mut gb = [0.0; 3];
            for ((o, l), x) in data.iter().zip(&xs) {
                let p = self.probs(o);
                for k in 0..3 {
                    let e = (p[k] - f64::from(u8::from(k == l.index()))) / n;
                    gb[k] += e;
                    for (j, xj) in x.iter().enumerate() {
                        gw[k * d + j] += e * xj;
                    }
                }
            }
            self.w.iter_mut().zip(&gw).for_each(|(w, g)| *w -= lr * g);
            self.b.iter_mut().zip(&gb).for_each(|(b, g)| *b -= lr * g);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartReport {
    pub epochs: usize,
    pub prior: [[f64; 3]; N_EXPERTS],
    pub accuracy: f64,
    pub cross_entropy: f64,
    pub head: RegimeHead,
}

/// Fits a regime head on labelled observations and maps it into router logits
/// through `prior`; `cfg.prior` is not consulted here.
pub fn warm_start(
    router: &RouterPolicy,
    data: &[(RouterObservation, RegimeLabel)],
    prior: &[[f64; 3]; N_EXPERTS],
    cfg: &WarmStartConfig,
) -> Result<(RouterPolicy, WarmStartReport)> {
    if router.mode != RouterMode::Dynamic {
        return Err(RouterError::NotDynamic(router.mode).into());
    }
    if data.is_empty() {
        return Err(TrainingError::NoLabels);
    }
    if let Some((o, _)) = data.iter().find(|(o, _)| o.dim() != router.dim) {
        return Err(RouterError::DimensionMismatch {
            expected: router.dim,
            got: o.dim(),
        }
        .into());
    }
    let mut head = RegimeHead::new(router.dim);
    if cfg.epochs == 0 {
        let report = WarmStartReport {
            epochs: 0,
            prior: *prior,
            accuracy: head.accuracy(data),
            cross_entropy: head.cross_entropy(data),
            head,
        };
        return Ok((router.clone(), report));
    }
    head.fit(data, cfg.epochs, cfg.lr, cfg.l2);
    let mut next = router.clone();
    let d = router.dim;
    let (w, b) = head.raw_logits();
    for (e, row) in prior.iter().enumerate() {
        for j in 0..d {
            next.phi[e * d + j] = cfg.prior_scale * (0..3).map(|k| row[k] * w[k * d + j]).sum::<f64>();
        }
        next.bias[e] = cfg.prior_scale * (0..3).map(|k| row[k] * b[k]).sum::<f64>();
    }
    if next.validate().is_err() {
        return Err(TrainingError::NonFinite {
            what: "warm-start weights",
            stage: "warm_start",
        });
    }
    let report = WarmStartReport {
        epochs: cfg.epochs,
        prior: *prior,
        accuracy: head.accuracy(data),
        cross_entropy: head.cross_entropy(data),
        head,
    };
    Ok((next, report))
}
