//! Run configuration: one file, TOML or JSON by extension, with defaults for
//! every field.
//!
//! A minimal TOML file only names what differs from the defaults:
//!
//! ```toml
//! seeds = [7]
//! output = "runs/seven"
//!
//! [windows]
//! horizon = 60
//!
//! [train]
//! episodes = 100
//! ```
//!
//! With no `data` files the synthetic three-regime suite is generated from
//! each seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backtest::ExecutionConfig;
use crate::baselines::{BaselineKind, BaselineParams};
use crate::experiment::{ExperimentConfig, ModalityConfig, SuiteConfig, WindowSpec};
use crate::market_data::{ColumnMapping, SplitSpec};
use crate::router::ObservationVariant;
use crate::strategy::{ActionId, StrategyParams};
use crate::training::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unsupported config extension for {0} (expected .toml or .json)")]
    Extension(PathBuf),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;

/// Where bars come from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// OHLCV CSV files, one asset each. Empty selects the synthetic suite.
    pub files: Vec<PathBuf>,
    pub columns: ColumnMapping,
    /// Chronological split of each file; training uses the first part and
    /// evaluation the last.
    pub split: SplitSpec,
}

/// What `backtest` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestSelection {
    pub actions: Vec<ActionId>,
    pub baselines: Vec<BaselineKind>,
}

impl Default for BacktestSelection {
    fn default() -> Self {
        Self {
            actions: ActionId::ALL.to_vec(),
            baselines: BaselineKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub suite: SuiteConfig,
    pub windows: WindowSpec,
    pub execution: ExecutionConfig,
    pub strategy: StrategyParams,
    pub baseline_params: BaselineParams,
    pub backtest: BacktestSelection,
    pub train: TrainConfig,
    pub modality: ModalityConfig,
    pub variants: Vec<ObservationVariant>,
    /// Ablations repeat over every seed; other commands use the first.
    pub seeds: Vec<u64>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let exp = ExperimentConfig::default();
        Self {
            data: DataConfig::default(),
            suite: exp.suite,
            windows: exp.windows,
            execution: exp.execution,
            strategy: exp.strategy,
            baseline_params: BaselineParams::default(),
            backtest: BacktestSelection::default(),
            train: exp.train,
            modality: ModalityConfig::default(),
            variants: ObservationVariant::ALL.to_vec(),
            seeds: (0..10).collect(),
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Reads a `.toml` or `.json` file. Relative data paths resolve against
    /// the working directory, not the config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text).map_err(|e| parse(e.to_string())),
            Some("json") => serde_json::from_str(&text).map_err(|e| parse(e.to_string())),
            _ => Err(ConfigError::Extension(path.to_path_buf())),
        }
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes to JSON")
    }

    /// Checks every section and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for f in &self.data.files {
            if !f.is_file() {
                errs.push(format!("data file {} does not exist", f.display()));
            }
        }
        if !self.data.files.is_empty() {
            if let Err(e) = self.data.split.validate() {
                errs.push(format!("data.split: {e}"));
            }
        }
        if self.suite.min_segment == 0 || self.suite.min_segment > self.suite.max_segment {
            errs.push("suite: segment length range is empty".into());
        }
        for (name, v) in [
            ("suite.drift", self.suite.drift),
            ("suite.swing_drift", self.suite.swing_drift),
        ] {
            if !v.is_finite() {
                errs.push(format!("{name} must be finite"));
            }
        }
        for (name, v) in [
            ("suite.trend_volatility", self.suite.trend_volatility),
            ("suite.flat_volatility", self.suite.flat_volatility),
            ("suite.wick_scale", self.suite.wick_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be finite and non-negative"));
            }
        }
        let w = &self.windows;
        if w.lookback == 0 || w.horizon == 0 || w.train_stride == 0 {
            errs.push("windows: lookback, horizon and train_stride must be positive".into());
        }
        if let Err(e) = self.execution.validate() {
            errs.push(format!("execution: {e}"));
        }
        if let Err(e) = self.strategy.validate() {
            errs.push(format!("strategy: {e}"));
        }
        if let Err(e) = self.baseline_params.validate() {
            errs.push(format!("baseline_params: {e}"));
        }
        if let Err(e) = self.train.validate() {
            errs.push(format!("train: {e}"));
        }
        if let Some(ws) = &self.train.warm_start {
            if !(ws.lr > 0.0 && ws.l2 >= 0.0 && ws.prior_scale.is_finite()) {
                errs.push("train.warm_start: lr must be positive, l2 non-negative, prior_scale finite".into());
            }
        }
        if !(self.modality.lr > 0.0 && self.modality.l2 >= 0.0) {
            errs.push("modality: lr must be positive and l2 non-negative".into());
        }
        if self.variants.is_empty() {
            errs.push("variants must not be empty".into());
        }
        if self.seeds.is_empty() {
            errs.push("seeds must not be empty".into());
        }
        if self.output.as_os_str().is_empty() {
            errs.push("output directory must be set".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            suite: self.suite.clone(),
            windows: self.windows.clone(),
            train: self.train.clone(),
            strategy: self.strategy.clone(),
            execution: self.execution.clone(),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.data.files.is_empty()
    }

    /// SHA-256 of the canonical JSON form. The output directory is left out:
    /// where results go does not change them.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let canonical = serde_json::to_string(&c).expect("run config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
