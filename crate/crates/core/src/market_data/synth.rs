use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Bar, BarSeries, MarketDataError, Result};

/// Largest intrabar wick as a fraction of price.
const MAX_WICK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeKind {
    Up,
    Down,
    Flat,
}

/// A block of bars sharing one log-return distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSegment {
    pub kind: RegimeKind,
    pub length: usize,
    /// Mean log return per bar.
    pub drift: f64,
    /// Standard deviation of the log return per bar.
    pub volatility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub asset: String,
    pub n_bars: usize,
    /// Cycled when `n_bars` exceeds the total schedule length.
    pub regimes: Vec<RegimeSegment>,
    pub seed: u64,
    pub initial_price: f64,
    pub base_volume: f64,
    /// Log-normal dispersion of volume.
    pub volume_noise: f64,
    /// Volume multiplier per unit of absolute log return.
    pub volume_coupling: f64,
    /// Wick dispersion relative to the segment volatility.
    pub wick_scale: f64,
    pub start: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            asset: "SYNTH".into(),
            n_bars: 500,
            regimes: vec![RegimeSegment {
                kind: RegimeKind::Flat,
                length: 500,
                drift: 0.0,
                volatility: 0.01,
            }],
            seed: 42,
            initial_price: 100.0,
            base_volume: 1_000_000.0,
            volume_noise: 0.2,
            volume_coupling: 10.0,
            wick_scale: 0.5,
            start: NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MarketDataError::InvalidSynth(m.into()));
        if self.n_bars == 0 {
            return bad("n_bars must be positive");
        }
        if self.regimes.is_empty() {
            return bad("regime schedule is empty");
        }
        for seg in &self.regimes {
            if seg.length == 0 {
                return bad("regime lengths must be positive");
            }
            if !(seg.volatility >= 0.0 && seg.volatility.is_finite()) || !seg.drift.is_finite() {
                return bad("volatility must be finite and non-negative");
            }
        }
        if !(self.initial_price > 0.0 && self.initial_price.is_finite()) {
            return bad("initial price must be positive");
        }
        if !(self.base_volume >= 0.0 && self.base_volume.is_finite()) {
            return bad("base volume must be non-negative");
        }
        if !(self.volume_noise >= 0.0 && self.volume_coupling >= 0.0 && self.wick_scale >= 0.0) {
            return bad("noise scales must be non-negative");
        }
        Ok(())
    }

    fn segment_at(&self, t: usize) -> &RegimeSegment {
        let total: usize = self.regimes.iter().map(|s| s.length).sum();
        let mut pos = t % total;
        for seg in &self.regimes {
            if pos < seg.length {
                return seg;
            }
            pos -= seg.length;
        }
        unreachable!("position is reduced modulo the schedule length")
    }
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<BarSeries> {
    synth_generate_labeled(cfg).map(|(s, _)| s)
}

/// Generates the series together with the regime that produced each bar.
pub fn synth_generate_labeled(cfg: &SynthConfig) -> Result<(BarSeries, Vec<RegimeKind>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bars = Vec::with_capacity(cfg.n_bars);
    let mut kinds = Vec::with_capacity(cfg.n_bars);
    let mut prev_close = cfg.initial_price;

    for t in 0..cfg.n_bars {
        let seg = cfg.segment_at(t);
        let z: f64 = rng.sample(StandardNormal);
        let eh: f64 = rng.sample(StandardNormal);
        let el: f64 = rng.sample(StandardNormal);
        let zv: f64 = rng.sample(StandardNormal);

        // Bar 0 anchors the path at the initial price.
        let r = if t == 0 { 0.0 } else { seg.drift + seg.volatility * z };
        let open = prev_close;
        let close = prev_close * r.exp();
        let wick = cfg.wick_scale * seg.volatility;
        let high = open.max(close) * (1.0 + (wick * eh).abs().min(MAX_WICK));
        let low = open.min(close) * (1.0 - (wick * el).abs().min(MAX_WICK));
        let volume =
            cfg.base_volume * (cfg.volume_noise * zv).exp() * (1.0 + cfg.volume_coupling * r.abs());

        bars.push(Bar {
            date: cfg.start + chrono::Days::new(t as u64),
            open,
            high,
            low,
            close,
            volume,
        });
        kinds.push(seg.kind);
        prev_close = close;
    }
    let series = BarSeries::new(cfg.asset.clone(), bars)?;
    Ok((series, kinds))
}
