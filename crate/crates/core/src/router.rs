//! Expert weight allocation.
//!
//! The router maps an observation vector to weights over the four expert
//! families. `Dynamic` is a linear policy followed by a temperature-scaled
//! normalized exponential; the other modes are the ablation controls.
//!
//! For policy-gradient training the dense weights are also read as a
//! categorical distribution over a single "dominant" expert. Execution always
//! uses the dense weights; only the gradient term samples from them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::{FeatureSource, IndicatorError, N_FEATURES, N_SUMMARY_FEATURES};
use crate::strategy::Family;

pub const N_EXPERTS: usize = 4;
/// Observation length: last standardized feature row plus numeric summary.
pub const OBS_DIM: usize = N_FEATURES + N_SUMMARY_FEATURES;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RouterError {
    #[error("weights must be finite, non-negative and sum to 1 (sum {sum})")]
    OffSimplex { sum: f64 },
    #[error("observation has {got} values, policy expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("best-expert routing needs trailing expert returns")]
    MissingHistory,
    #[error("operation requires dynamic mode, policy is {0:?}")]
    NotDynamic(RouterMode),
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown router mode '{0}'")]
    UnknownMode(String),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

pub type Result<T, E = RouterError> = std::result::Result<T, E>;

/// Weights over (trend, reversal, breakout, position).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertWeights([f64; N_EXPERTS]);

impl ExpertWeights {
    pub fn new(w: [f64; N_EXPERTS]) -> Result<Self> {
        let sum: f64 = w.iter().sum();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(RouterError::OffSimplex { sum });
        }
        Ok(Self(w))
    }

    pub fn uniform() -> Self {
        Self([0.25; N_EXPERTS])
    }

    pub fn one_hot(i: usize) -> Self {
        let mut w = [0.0; N_EXPERTS];
        w[i] = 1.0;
        Self(w)
    }

    pub fn as_array(&self) -> &[f64; N_EXPERTS] {
        &self.0
    }

    pub fn get(&self, f: Family) -> f64 {
        self.0[f.index()]
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable normalized exponential.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterMode {
    Dynamic,
    Uniform,
    BestExpert,
    Random,
}

impl RouterMode {
    pub const ALL: [RouterMode; 4] = [Self::Dynamic, Self::Uniform, Self::BestExpert, Self::Random];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dynamic => "Dynamic",
            Self::Uniform => "Uniform",
            Self::BestExpert => "BestExpert",
            Self::Random => "Random",
        }
    }
}

impl std::str::FromStr for RouterMode {
    type Err = RouterError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "dynamic" => Ok(Self::Dynamic),
            "uniform" => Ok(Self::Uniform),
            "bestexpert" | "best" => Ok(Self::BestExpert),
            "random" => Ok(Self::Random),
            _ => Err(RouterError::UnknownMode(s.to_string())),
        }
    }
}

/// Fixed-length observation taken at a decision bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterObservation(pub Vec<f64>);

/// Which observation sources are visible; hidden parts are zeroed so the
/// dimension never changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationVariant {
    Full,
    SummaryOnly,
    MatrixOnly,
    Zero,
}

impl ObservationVariant {
    pub const ALL: [ObservationVariant; 4] = [Self::Full, Self::SummaryOnly, Self::MatrixOnly, Self::Zero];

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::SummaryOnly => "summary_only",
            Self::MatrixOnly => "matrix_only",
            Self::Zero => "zero",
        }
    }
}

impl RouterObservation {
    /// Observation at bar `t` over a `lookback`-row feature window.
    pub fn at(source: &FeatureSource, t: usize, lookback: usize) -> Result<Self> {
        let m = source.matrix(t, lookback)?;
        let mut v = m.standardized_row(m.rows() - 1).to_vec();
        v.extend_from_slice(&source.summary(t)?.numeric());
        if v.iter().any(|x| !x.is_finite()) {
            return Err(RouterError::NonFinite("observation"));
        }
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn masked(&self, variant: ObservationVariant) -> Self {
        let mut v = self.0.clone();
        let split = N_FEATURES.min(v.len());
        match variant {
            ObservationVariant::Full => {}
            ObservationVariant::SummaryOnly => v[..split].fill(0.0),
            ObservationVariant::MatrixOnly => v[split..].fill(0.0),
            ObservationVariant::Zero => v.fill(0.0),
        }
        Self(v)
    }
}

/// Inputs that are not part of the observation.
#[derive(Debug, Clone, Copy, Default)]
pub struct RouteContext<'a> {
    /// Trailing return of each expert, required by `BestExpert`.
    pub history: Option<&'a [f64; N_EXPERTS]>,
    /// Draw counter for `Random`, typically the window index.
    pub draw: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterPolicy {
    pub version: u32,
    pub mode: RouterMode,
    pub dim: usize,
    /// Row-major `N_EXPERTS x dim`.
    pub phi: Vec<f64>,
    pub bias: [f64; N_EXPERTS],
    pub temperature: f64,
    pub seed: u64,
}

/// Gradient with respect to (phi, bias).
#[derive(Debug, Clone, PartialEq)]
pub struct RouterGrad {
    pub phi: Vec<f64>,
    pub bias: [f64; N_EXPERTS],
}

impl RouterGrad {
    pub fn zeros(dim: usize) -> Self {
        Self {
            phi: vec![0.0; N_EXPERTS * dim],
            bias: [0.0; N_EXPERTS],
        }
    }

    pub fn norm(&self) -> f64 {
        self.phi.iter().chain(&self.bias).map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn add_scaled(&mut self, other: &RouterGrad, c: f64) {
        for (a, b) in self.phi.iter_mut().zip(&other.phi) {
            *a += c * b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.phi.iter_mut().chain(self.bias.iter_mut()).for_each(|g| *g *= c);
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().chain(&self.bias).all(|g| g.is_finite())
    }
}

impl RouterPolicy {
    pub fn new(mode: RouterMode, dim: usize, temperature: f64, seed: u64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(RouterError::BadTemperature(temperature));
        }
        Ok(Self {
            version: CHECKPOINT_VERSION,
            mode,
            dim,
            phi: vec![0.0; N_EXPERTS * dim],
            bias: [0.0; N_EXPERTS],
            temperature,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(RouterError::BadTemperature(self.temperature));
        }
        if self.phi.len() != N_EXPERTS * self.dim {
            return Err(RouterError::DimensionMismatch {
                expected: N_EXPERTS * self.dim,
                got: self.phi.len(),
            });
        }
        if self.phi.iter().chain(&self.bias).any(|x| !x.is_finite()) {
            return Err(RouterError::NonFinite("router parameters"));
        }
        Ok(())
    }

    fn check_obs(&self, obs: &RouterObservation) -> Result<()> {
        if obs.dim() != self.dim {
            return Err(RouterError::DimensionMismatch {
                expected: self.dim,
                got: obs.dim(),
            });
        }
        Ok(())
    }

    /// Temperature-scaled logits `(phi . obs + bias) / T`.
    pub fn logits(&self, obs: &RouterObservation) -> Result<[f64; N_EXPERTS]> {
        self.check_obs(obs)?;
        let mut z = [0.0; N_EXPERTS];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.phi[k * self.dim..(k + 1) * self.dim];
            let dot: f64 = row.iter().zip(obs.values()).map(|(a, b)| a * b).sum();
            *zk = (dot + self.bias[k]) / self.temperature;
        }
        Ok(z)
    }

    /// Dynamic-mode weights regardless of the configured mode.
    pub fn dynamic_weights(&self, obs: &RouterObservation) -> Result<[f64; N_EXPERTS]> {
        let p = softmax(&self.logits(obs)?);
        Ok([p[0], p[1], p[2], p[3]])
    }

    fn require_dynamic(&self) -> Result<()> {
        match self.mode {
            RouterMode::Dynamic => Ok(()),
            other => Err(RouterError::NotDynamic(other)),
        }
    }

    /// Gradient of `log pi(choice | obs)` for the categorical reading of the weights.
    pub fn log_prob_grad(&self, obs: &RouterObservation, choice: usize) -> Result<RouterGrad> {
        self.require_dynamic()?;
        let p = self.dynamic_weights(obs)?;
        let dz: Vec<f64> = (0..N_EXPERTS)
            .map(|k| (f64::from(u8::from(k == choice)) - p[k]) / self.temperature)
            .collect();
        Ok(self.outer(&dz, obs))
    }

    /// Gradient of the weight entropy `-sum p log p`.
    pub fn entropy_grad(&self, obs: &RouterObservation) -> Result<RouterGrad> {
        self.require_dynamic()?;
        let p = self.dynamic_weights(obs)?;
        let s = crate::training::entropy(&p);
        let dz: Vec<f64> = p
            .iter()
            .map(|&pk| if pk > 0.0 { -pk * (pk.ln() + s) / self.temperature } else { 0.0 })
            .collect();
        Ok(self.outer(&dz, obs))
    }

    fn outer(&self, dz: &[f64], obs: &RouterObservation) -> RouterGrad {
        let mut g = RouterGrad::zeros(self.dim);
        for k in 0..N_EXPERTS {
            g.bias[k] = dz[k];
            for (j, x) in obs.values().iter().enumerate() {
                g.phi[k * self.dim + j] = dz[k] * x;
            }
        }
        g
    }

    pub fn apply_step(&mut self, g: &RouterGrad, lr: f64) {
        for (a, b) in self.phi.iter_mut().zip(&g.phi) {
            *a += lr * b;
        }
        for (a, b) in self.bias.iter_mut().zip(&g.bias) {
            *a += lr * b;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }
}

/// Allocates weights for one window.
pub fn route(policy: &RouterPolicy, obs: &RouterObservation, ctx: RouteContext) -> Result<ExpertWeights> {
    match policy.mode {
        RouterMode::Dynamic => ExpertWeights::new(policy.dynamic_weights(obs)?),
        RouterMode::Uniform => Ok(ExpertWeights::uniform()),
        RouterMode::BestExpert => {
            let h = ctx.history.ok_or(RouterError::MissingHistory)?;
            if h.iter().any(|x| !x.is_finite()) {
                return Err(RouterError::NonFinite("expert history"));
            }
            Ok(ExpertWeights::one_hot(argmax(h)))
        }
        RouterMode::Random => Ok(random_weights(policy.seed, ctx.draw)),
    }
}

/// Uniform draw from the simplex: normalized unit exponentials on a
/// per-draw ChaCha stream.
pub fn random_weights(seed: u64, draw: u64) -> ExpertWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    let e: [f64; N_EXPERTS] = std::array::from_fn(|_| Exp1.sample(&mut rng));
    let s: f64 = e.iter().sum();
    let mut w = e.map(|x| x / s);
    // Push rounding residue into the largest weight.
    let fix = 1.0 - w.iter().sum::<f64>();
    let i = argmax(&w);
    w[i] += fix;
    ExpertWeights(w)
}
