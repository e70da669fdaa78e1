//! Seeded experiments on synthetic three-regime markets.
//!
//! A suite is a pair of independently generated series, one to train on and
//! one held out, each a random sequence of up, down and flat segments. The
//! generator's per-bar regime is the ground truth for the labeller, and the
//! held-out series drives the routing and observation ablations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backtest::ExecutionConfig;
use crate::market_data::{
    synth_generate_labeled, window_indices, BarSeries, MarketDataError, RegimeKind, RegimeSegment,
    SynthConfig,
};
use crate::regime::{label_counts, RegimeClassifier, RegimeLabel};
use crate::router::{ObservationVariant, RouterMode, RouterObservation};
use crate::strategy::StrategyParams;
use crate::training::{
    evaluate, train_loop, EvalRecord, RegimeHead, Result, TrainConfig, TrainOutcome, TrainingError,
    WindowTable,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub train_bars: usize,
    pub test_bars: usize,
    /// Segment lengths are drawn uniformly from this inclusive range.
    pub min_segment: usize,
    pub max_segment: usize,
    /// Absolute mean log return per bar of trending segments.
    pub drift: f64,
    pub trend_volatility: f64,
    pub flat_volatility: f64,
    /// Intrabar range relative to segment volatility.
    pub wick_scale: f64,
    /// Flat segments zigzag: sub-segments of this length alternate between
    /// `+swing_drift` and `-swing_drift`, keeping price inside a range.
    pub swing_length: usize,
    pub swing_drift: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            train_bars: 2400,
            test_bars: 1400,
            min_segment: 200,
            max_segment: 320,
            drift: 0.003,
            trend_volatility: 0.01,
            flat_volatility: 0.003,
            wick_scale: 0.5,
            swing_length: 4,
            swing_drift: 0.008,
        }
    }
}

/// Window geometry shared by training and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub lookback: usize,
    pub horizon: usize,
    /// Bars between consecutive training windows. Evaluation windows are
    /// spaced one horizon apart so they do not overlap.
    pub train_stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            lookback: 100,
            horizon: 90,
            train_stride: 10,
        }
    }
}

pub fn regime_of(kind: RegimeKind) -> RegimeLabel {
    match kind {
        RegimeKind::Up => RegimeLabel::Uptrend,
        RegimeKind::Down => RegimeLabel::Downtrend,
        RegimeKind::Flat => RegimeLabel::Consolidation,
    }
}

/// A random schedule covering at least `n` bars; consecutive segments differ.
pub fn random_schedule(cfg: &SuiteConfig, n: usize, rng: &mut ChaCha8Rng) -> Vec<RegimeSegment> {
    let mut out = Vec::new();
    let mut covered = 0;
    let mut prev: Option<RegimeKind> = None;
    while covered < n {
        let kind = loop {
            let k = [RegimeKind::Up, RegimeKind::Down, RegimeKind::Flat][rng.random_range(0..3)];
            if Some(k) != prev {
                break k;
            }
        };
        let length = rng.random_range(cfg.min_segment..=cfg.max_segment);
        match kind {
            RegimeKind::Up | RegimeKind::Down => {
                let drift = if kind == RegimeKind::Up { cfg.drift } else { -cfg.drift };
                out.push(RegimeSegment { kind, length, drift, volatility: cfg.trend_volatility });
            }
            RegimeKind::Flat if cfg.swing_length == 0 => {
                out.push(RegimeSegment { kind, length, drift: 0.0, volatility: cfg.flat_volatility });
            }
            RegimeKind::Flat => {
                let mut left = length;
                let mut sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                while left > 0 {
                    let l = left.min(cfg.swing_length);
                    out.push(RegimeSegment {
                        kind,
                        length: l,
                        drift: sign * cfg.swing_drift,
                        volatility: cfg.flat_volatility,
                    });
                    left -= l;
                    sign = -sign;
                }
            }
        }
        covered += length;
        prev = Some(kind);
    }
    out
}

#[derive(Debug, Clone)]
pub struct SyntheticSuite {
    pub train: BarSeries,
    pub train_kinds: Vec<RegimeKind>,
    pub test: BarSeries,
    pub test_kinds: Vec<RegimeKind>,
}

pub fn synthetic_suite(cfg: &SuiteConfig, seed: u64) -> Result<SyntheticSuite, MarketDataError> {
    if cfg.min_segment == 0 || cfg.min_segment > cfg.max_segment {
        return Err(MarketDataError::InvalidSynth("segment length range is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |asset: &str, n: usize, offset: u64, start| {
        let regimes = random_schedule(cfg, n, &mut rng);
        synth_generate_labeled(&SynthConfig {
            asset: asset.into(),
            n_bars: n,
            regimes,
            seed: seed.wrapping_mul(2).wrapping_add(offset),
            wick_scale: cfg.wick_scale,
            start,
            ..SynthConfig::default()
        })
    };
    let (train, train_kinds) = make("SYN-TRAIN", cfg.train_bars, 0, SynthConfig::default().start)?;
    // The held-out series continues the calendar where training ends.
    let after = train.bars()[train.len() - 1].date.succ_opt().expect("date in range");
    let (test, test_kinds) = make("SYN-TEST", cfg.test_bars, 1, after)?;
    Ok(SyntheticSuite {
        train,
        train_kinds,
        test,
        test_kinds,
    })
}

/// Generator label of a bar range by the same at-least-half rule as the labeller.
pub fn ground_truth(kinds: &[RegimeKind], range: std::ops::Range<usize>) -> RegimeLabel {
    let w = &kinds[range];
    let up = w.iter().filter(|k| **k == RegimeKind::Up).count();
    let down = w.iter().filter(|k| **k == RegimeKind::Down).count();
    label_counts(up, down, w.len()).map(|l| l.label).unwrap_or(RegimeLabel::Consolidation)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub windows: usize,
    pub matches: usize,
}

impl Agreement {
    pub fn rate(&self) -> f64 {
        if self.windows == 0 {
            0.0
        } else {
            self.matches as f64 / self.windows as f64
        }
    }
}

/// How often the mechanical window label equals the generator's.
pub fn label_agreement(
    series: &BarSeries,
    kinds: &[RegimeKind],
    horizon: usize,
    stride: usize,
) -> Result<Agreement> {
    let c = RegimeClassifier::new(series.bars())?;
    let mut out = Agreement { windows: 0, matches: 0 };
    for w in window_indices(series.len(), RegimeClassifier::warmup(), horizon, stride) {
        let got = c.window(w.horizon.clone())?.label;
        out.windows += 1;
        if got == ground_truth(kinds, w.horizon) {
            out.matches += 1;
        }
    }
    Ok(out)
}

/// Everything an ablation needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub suite: SuiteConfig,
    pub windows: WindowSpec,
    pub train: TrainConfig,
    pub strategy: StrategyParams,
    pub execution: ExecutionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            suite: SuiteConfig::default(),
            windows: WindowSpec::default(),
            train: desk_train_config(),
            strategy: StrategyParams::default(),
            execution: ExecutionConfig::default(),
        }
    }
}

/// Training preset for the synthetic suite.
///
/// The default learning rate is sized for fine-tuning a large pretrained
/// network; the linear policies here start from zero and need larger steps
/// to move within a few hundred episodes. The router gets a smaller step
/// than the experts; at the expert rate it collapses to one-hot weights.
pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        episodes: 200,
        expert_lr: 0.5,
        router_lr: 0.2,
        ..TrainConfig::default()
    }
}

/// Window tables for the training and held-out series.
pub struct SuiteTables {
    pub train: WindowTable,
    pub test: WindowTable,
}

impl SuiteTables {
    pub fn train(&self) -> &[WindowTable] {
        std::slice::from_ref(&self.train)
    }

    pub fn test(&self) -> &[WindowTable] {
        std::slice::from_ref(&self.test)
    }
}

pub fn suite_tables(suite: &SyntheticSuite, cfg: &ExperimentConfig) -> Result<SuiteTables> {
    series_tables(&suite.train, &suite.test, cfg)
}

/// Training windows from `train` and non-overlapping evaluation windows from `test`.
pub fn series_tables(train: &BarSeries, test: &BarSeries, cfg: &ExperimentConfig) -> Result<SuiteTables> {
    let w = &cfg.windows;
    Ok(SuiteTables {
        train: WindowTable::build(train, &cfg.strategy, &cfg.execution, w.lookback, w.horizon, w.train_stride)?,
        test: WindowTable::build(test, &cfg.strategy, &cfg.execution, w.lookback, w.horizon, w.horizon)?,
    })
}

pub fn train_on_suite(tables: &SuiteTables, cfg: &ExperimentConfig, seed: u64) -> Result<TrainOutcome> {
    let train = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    train_loop(std::slice::from_ref(&tables.train), &train)
}

/// Trains experts and a dynamic router once, then replays the held-out
/// series under each routing mode with the same experts.
pub fn ablate_routing(
    train: &[WindowTable],
    test: &[WindowTable],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<EvalRecord>> {
    let mut tc = cfg.train.clone();
    tc.router_mode = RouterMode::Dynamic;
    tc.seed = seed;
    let out = train_loop(train, &tc)?;
    RouterMode::ALL.iter().map(|m| evaluate(&out.checkpoint, test, *m)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityRow {
    pub variant: ObservationVariant,
    /// Held-out accuracy of predicting the next window's regime.
    pub accuracy: f64,
    pub train_accuracy: f64,
    /// Held-out share of the most common training label: the accuracy of a
    /// head that ignores its input.
    pub majority_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModalityConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
}

impl Default for ModalityConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 0.5,
            l2: 0.1,
        }
    }
}

fn masked(data: &[(RouterObservation, RegimeLabel)], v: ObservationVariant) -> Vec<(RouterObservation, RegimeLabel)> {
    data.iter().map(|(o, l)| (o.masked(v), *l)).collect()
}

/// Regime-prediction accuracy of a fitted head for each observation variant.
pub fn ablate_modality(
    train: &[WindowTable],
    test: &[WindowTable],
    variants: &[ObservationVariant],
    cfg: &ModalityConfig,
) -> Result<Vec<ModalityRow>> {
    let train: Vec<_> = train.iter().flat_map(WindowTable::labelled).collect();
    let test: Vec<_> = test.iter().flat_map(WindowTable::labelled).collect();
    if train.is_empty() || test.is_empty() {
        return Err(TrainingError::NoLabels);
    }
    let mut counts = [0usize; 3];
    for (_, l) in &train {
        counts[l.index()] += 1;
    }
    let majority = crate::router::argmax(&counts.map(|c| c as f64));
    let majority_rate = test.iter().filter(|(_, l)| l.index() == majority).count() as f64 / test.len() as f64;
    Ok(variants
        .iter()
        .map(|v| {
            let tr = masked(&train, *v);
            let mut head = RegimeHead::new(tr[0].0.dim());
            head.fit(&tr, cfg.epochs, cfg.lr, cfg.l2);
            ModalityRow {
                variant: *v,
                accuracy: head.accuracy(&masked(&test, *v)),
                train_accuracy: head.accuracy(&tr),
                majority_rate,
            }
        })
        .collect())
}
