use serde::{Deserialize, Serialize};

use super::StrategyError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaCrossParams {
    pub fast: usize,
    pub slow: usize,
    pub atr_period: usize,
    pub atr_mult: f64,
    pub max_layers: usize,
    /// Relative MA gap that counts as trend strength on entry.
    pub trend_threshold: f64,
    /// Five-bar return that counts as momentum on entry.
    pub momentum_entry: f64,
    /// Five-bar return magnitude required for stop and death-cross exits.
    pub exit_momentum: f64,
    /// Prior closes scanned by the add-layer breakout check.
    pub breakout_lookback: usize,
}

impl Default for MaCrossParams {
    fn default() -> Self {
        Self {
            fast: 5,
            slow: 20,
            atr_period: 14,
            atr_mult: 1.5,
            max_layers: 4,
            trend_threshold: 0.02,
            momentum_entry: 0.03,
            exit_momentum: 0.02,
            breakout_lookback: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentumParams {
    pub short: usize,
    pub lookback: usize,
    pub long: usize,
    pub accel_lag: usize,
    pub entry_threshold: f64,
    pub exit_threshold: f64,
    pub atr_period: usize,
    pub atr_mult: f64,
    pub max_layers: usize,
    pub rsi_period: usize,
    pub rsi_short: f64,
    pub rsi_long: f64,
    pub volume_entry: f64,
    pub volume_add: f64,
}

impl Default for MomentumParams {
    fn default() -> Self {
        Self {
            short: 5,
            lookback: 10,
            long: 20,
            accel_lag: 5,
            entry_threshold: 0.02,
            exit_threshold: 0.005,
            atr_period: 14,
            atr_mult: 1.5,
            max_layers: 3,
            rsi_period: 14,
            rsi_short: 40.0,
            rsi_long: 50.0,
            volume_entry: 1.2,
            volume_add: 1.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurtleParams {
    pub entry_period: usize,
    pub exit_period: usize,
    pub atr_period: usize,
    pub atr_mult: f64,
    pub max_units: usize,
    /// Move in ATR units beyond the last entry that triggers a new unit.
    pub add_step: f64,
    pub take_profit: f64,
    /// Volume ratio confirming an entry.
    pub volume_confirm: f64,
    /// ATR as a fraction of price under which volatility counts as calm.
    pub calm_atr: f64,
}

impl Default for TurtleParams {
    fn default() -> Self {
        Self {
            entry_period: 20,
            exit_period: 10,
            atr_period: 20,
            atr_mult: 2.0,
            max_units: 5,
            add_step: 0.5,
            take_profit: 0.10,
            volume_confirm: 1.2,
            calm_atr: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BollParams {
    pub period: usize,
    pub k: f64,
    pub atr_period: usize,
    pub atr_mult: f64,
    pub max_layers: usize,
    pub rsi_period: usize,
    pub rsi_oversold: f64,
    pub rsi_overbought: f64,
    pub momentum_lag: usize,
    pub volume_confirm: f64,
    /// Bars in position after which another layer may be justified by time.
    pub add_after_bars: usize,
    /// Bars within which a move back inside the band marks a false break.
    pub false_break_bars: usize,
}

impl Default for BollParams {
    fn default() -> Self {
        Self {
            period: 20,
            k: 1.8,
            atr_period: 14,
            atr_mult: 1.8,
            max_layers: 3,
            rsi_period: 14,
            rsi_oversold: 35.0,
            rsi_overbought: 65.0,
            momentum_lag: 3,
            volume_confirm: 1.2,
            add_after_bars: 5,
            false_break_bars: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsiParams {
    pub period: usize,
    pub oversold: f64,
    pub overbought: f64,
    pub neutral: f64,
    pub atr_period: usize,
    pub atr_mult: f64,
    pub max_layers: usize,
    pub profit_target: f64,
    pub profit_rsi: f64,
    pub trend_lag: usize,
    /// Five-bar return below which the trend counts as flat or negative.
    pub flat_trend: f64,
    pub volume_spike: f64,
    pub divergence_lookback: usize,
    /// Drop below the last entry that justifies averaging down.
    pub add_drop: f64,
}

impl Default for RsiParams {
    fn default() -> Self {
        Self {
            period: 14,
            oversold: 35.0,
            overbought: 65.0,
            neutral: 50.0,
            atr_period: 14,
            atr_mult: 1.8,
            max_layers: 3,
            profit_target: 0.08,
            profit_rsi: 60.0,
            trend_lag: 5,
            flat_trend: 0.01,
            volume_spike: 1.5,
            divergence_lookback: 10,
            add_drop: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KdjParams {
    pub period: usize,
    pub j_buy: f64,
    pub k_buy: f64,
    pub j_sell: f64,
    pub k_sell: f64,
    pub atr_period: usize,
    pub atr_mult: f64,
    pub max_layers: usize,
    pub cross_exit_k: f64,
    pub j_exit: f64,
    pub j_momentum_exit: f64,
    pub profit_target: f64,
    pub profit_level: f64,
    pub momentum_lag: usize,
    pub volume_confirm: f64,
}

impl Default for KdjParams {
    fn default() -> Self {
        Self {
            period: 9,
            j_buy: 10.0,
            k_buy: 20.0,
            j_sell: 90.0,
            k_sell: 80.0,
            atr_period: 14,
            atr_mult: 1.8,
            max_layers: 3,
            cross_exit_k: 70.0,
            j_exit: 80.0,
            j_momentum_exit: 10.0,
            profit_target: 0.08,
            profit_level: 70.0,
            momentum_lag: 3,
            volume_confirm: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VolumeBreakoutParams {
    pub price_window: usize,
    pub volume_window: usize,
    pub ma_period: usize,
    pub volume_mult: f64,
    pub atr_period: usize,
    pub atr_mult: f64,
    pub max_layers: usize,
    /// Volume ratio under which participation counts as exhausted.
    pub exhaustion: f64,
    /// Volume ratio that keeps a pyramid going.
    pub volume_hold: f64,
    /// Volume ratio that adds a sizing confirmation.
    pub volume_strong: f64,
    /// Breakout distance in ATR units that adds a sizing confirmation.
    pub breakout_atr: f64,
}

impl Default for VolumeBreakoutParams {
    fn default() -> Self {
        Self {
            price_window: 20,
            volume_window: 5,
            ma_period: 10,
            volume_mult: 1.5,
            atr_period: 14,
            atr_mult: 1.8,
            max_layers: 3,
            exhaustion: 0.7,
            volume_hold: 1.0,
            volume_strong: 2.0,
            breakout_atr: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtrBreakoutParams {
    pub ma_period: usize,
    pub atr_period: usize,
    pub entry_mult: f64,
    pub exit_mult: f64,
    pub stop_mult: f64,
    pub max_layers: usize,
    pub slope_lag: usize,
    pub volume_confirm: f64,
    /// Overshoot past the channel in ATR units that adds a sizing confirmation.
    pub overshoot_atr: f64,
}

impl Default for AtrBreakoutParams {
    fn default() -> Self {
        Self {
            ma_period: 20,
            atr_period: 20,
            entry_mult: 1.5,
            exit_mult: 0.75,
            stop_mult: 1.2,
            max_layers: 3,
            slope_lag: 5,
            volume_confirm: 1.2,
            overshoot_atr: 0.25,
        }
    }
}

/// Score-based sizing shared by every rule strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SizingParams {
    pub base: f64,
    pub per_confirmation: f64,
    /// Allocation of the always-short benchmark.
    pub short_only_fraction: f64,
    /// Bars used by every volume ratio.
    pub volume_window: usize,
    /// Bars over which a shrinking MA gap counts as divergence.
    pub divergence_bars: usize,
}

impl Default for SizingParams {
    fn default() -> Self {
        Self {
            base: 0.5,
            per_confirmation: 0.25,
            short_only_fraction: 0.5,
            volume_window: 5,
            divergence_bars: 3,
        }
    }
}

impl SizingParams {
    /// `min(1, base + per_confirmation * n)`.
    pub fn size(&self, confirmations: usize) -> f64 {
        (self.base + self.per_confirmation * confirmations as f64).min(1.0)
    }
}

/// Parameters of all eleven actions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyParams {
    pub ma_cross: MaCrossParams,
    pub momentum: MomentumParams,
    pub turtle: TurtleParams,
    pub boll: BollParams,
    pub rsi: RsiParams,
    pub kdj: KdjParams,
    pub volume: VolumeBreakoutParams,
    pub atr: AtrBreakoutParams,
    pub sizing: SizingParams,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let periods = [
            ("ma_cross.fast", self.ma_cross.fast),
            ("ma_cross.slow", self.ma_cross.slow),
            ("ma_cross.atr_period", self.ma_cross.atr_period),
            ("ma_cross.breakout_lookback", self.ma_cross.breakout_lookback),
            ("momentum.short", self.momentum.short),
            ("momentum.lookback", self.momentum.lookback),
            ("momentum.long", self.momentum.long),
            ("momentum.accel_lag", self.momentum.accel_lag),
            ("momentum.atr_period", self.momentum.atr_period),
            ("momentum.rsi_period", self.momentum.rsi_period),
            ("turtle.entry_period", self.turtle.entry_period),
            ("turtle.exit_period", self.turtle.exit_period),
            ("turtle.atr_period", self.turtle.atr_period),
            ("boll.atr_period", self.boll.atr_period),
            ("boll.rsi_period", self.boll.rsi_period),
            ("boll.momentum_lag", self.boll.momentum_lag),
            ("rsi.period", self.rsi.period),
            ("rsi.atr_period", self.rsi.atr_period),
            ("rsi.trend_lag", self.rsi.trend_lag),
            ("rsi.divergence_lookback", self.rsi.divergence_lookback),
            ("kdj.period", self.kdj.period),
            ("kdj.atr_period", self.kdj.atr_period),
            ("kdj.momentum_lag", self.kdj.momentum_lag),
            ("volume.price_window", self.volume.price_window),
            ("volume.volume_window", self.volume.volume_window),
            ("volume.ma_period", self.volume.ma_period),
            ("volume.atr_period", self.volume.atr_period),
            ("atr.ma_period", self.atr.ma_period),
            ("atr.atr_period", self.atr.atr_period),
            ("atr.slope_lag", self.atr.slope_lag),
            ("sizing.volume_window", self.sizing.volume_window),
            ("sizing.divergence_bars", self.sizing.divergence_bars),
        ];
        if let Some((name, _)) = periods.iter().find(|(_, p)| *p == 0) {
            return Err(StrategyError::InvalidParams(format!("{name} must be >= 1")));
        }
        if self.boll.period < 2 {
            return Err(StrategyError::InvalidParams("boll.period must be >= 2".into()));
        }
        let layers = [
            ("ma_cross.max_layers", self.ma_cross.max_layers),
            ("momentum.max_layers", self.momentum.max_layers),
            ("turtle.max_units", self.turtle.max_units),
            ("boll.max_layers", self.boll.max_layers),
            ("rsi.max_layers", self.rsi.max_layers),
            ("kdj.max_layers", self.kdj.max_layers),
            ("volume.max_layers", self.volume.max_layers),
            ("atr.max_layers", self.atr.max_layers),
        ];
        if let Some((name, _)) = layers.iter().find(|(_, l)| *l == 0) {
            return Err(StrategyError::InvalidParams(format!("{name} must be >= 1")));
        }
        let mults = [
            ("ma_cross.atr_mult", self.ma_cross.atr_mult),
            ("momentum.atr_mult", self.momentum.atr_mult),
            ("turtle.atr_mult", self.turtle.atr_mult),
            ("boll.atr_mult", self.boll.atr_mult),
            ("rsi.atr_mult", self.rsi.atr_mult),
            ("kdj.atr_mult", self.kdj.atr_mult),
            ("volume.atr_mult", self.volume.atr_mult),
            ("volume.volume_mult", self.volume.volume_mult),
            ("atr.entry_mult", self.atr.entry_mult),
            ("atr.exit_mult", self.atr.exit_mult),
            ("atr.stop_mult", self.atr.stop_mult),
            ("sizing.short_only_fraction", self.sizing.short_only_fraction),
        ];
        if let Some((name, _)) = mults.iter().find(|(_, m)| !(*m > 0.0 && m.is_finite())) {
            return Err(StrategyError::InvalidParams(format!("{name} must be positive")));
        }
        if !(self.boll.k >= 0.0) {
            return Err(StrategyError::InvalidParams("boll.k must be non-negative".into()));
        }
        let s = &self.sizing;
        if !(s.base > 0.0 && s.base <= 1.0 && s.per_confirmation >= 0.0) || s.short_only_fraction > 1.0 {
            return Err(StrategyError::InvalidParams("sizing fractions must lie in (0, 1]".into()));
        }
        Ok(())
    }
}
