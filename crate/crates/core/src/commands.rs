//! Command implementations behind the `moe-trader` binary.
//!
//! Each command takes a validated [`RunConfig`], does its work, writes its
//! side artifacts into the output directory and returns a [`RunReport`].
//! [`execute`] adds validation and report writing around them. Nothing
//! here reads the clock, so identical configs give identical bytes.

use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::backtest::{run_prepared, BacktestError, BacktestResult};
use crate::baselines::{run_baseline, BaselineError, BaselineKind};
use crate::config::{ConfigError, RunConfig};
use crate::experiment::{
    ablate_modality, ablate_routing, ground_truth, series_tables, synthetic_suite,
};
use crate::market_data::{
    load_csv, split, window_indices, write_csv, BarSeries, MarketDataError, RegimeKind,
};
use crate::metrics::{MetricReport, MetricsError};
use crate::regime::{RegimeClassifier, RegimeError};
use crate::report::{
    summarize_routing, AgreementRow, AggregateRow, AssetSummary, CurveRecord, EquityCurves,
    LabelRow, ModalityRecord, RoutingRow, RunReport, WindowRow,
};
use crate::strategy::{ActionId, Prepared, StrategyError};
use crate::training::{evaluate, train_loop, TrainConfig, TrainingError, WindowTable};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    MarketData(#[from] MarketDataError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Regime(#[from] RegimeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{asset}: no complete {lookback}+{horizon} bar window after {warmup} warm-up bars")]
    NoWindows {
        asset: String,
        lookback: usize,
        horizon: usize,
        warmup: usize,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read report {path}: {message}")]
    Report { path: PathBuf, message: String },
}

impl CommandError {
    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = CommandError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Synth,
    Label,
    Backtest,
    AblateRouting,
    AblateModality,
    Train,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ingest => "ingest",
            Self::Synth => "synth",
            Self::Label => "label",
            Self::Backtest => "backtest",
            Self::AblateRouting => "ablate-routing",
            Self::AblateModality => "ablate-modality",
            Self::Train => "train",
        }
    }
}

/// Validates `cfg`, runs `cmd` and writes the report into `cfg.output`.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let report = match cmd {
        Command::Ingest => ingest(cfg)?,
        Command::Synth => synth(cfg)?,
        Command::Label => label(cfg)?,
        Command::Backtest => backtest(cfg)?,
        Command::AblateRouting => cmd_ablate_routing(cfg)?,
        Command::AblateModality => cmd_ablate_modality(cfg)?,
        Command::Train => train(cfg)?,
    };
    write_report(&report, &cfg.output)?;
    Ok(report)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    report.write(dir).map_err(io_err(dir))?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, body: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(io_err(&path))
}

/// A series plus, for generated data, its per-bar regime.
#[derive(Debug, Clone)]
pub struct Asset {
    pub series: BarSeries,
    pub kinds: Option<Vec<RegimeKind>>,
}

/// Bars for one seed: whole series for backtests and labels, and the
/// training and evaluation parts for learning.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub assets: Vec<Asset>,
    pub train: Vec<BarSeries>,
    pub test: Vec<BarSeries>,
}

/// CSV files split chronologically, or the synthetic suite generated from `seed`.
pub fn load_dataset(cfg: &RunConfig, seed: u64) -> Result<Dataset> {
    if cfg.is_synthetic() {
        let s = synthetic_suite(&cfg.suite, seed)?;
        return Ok(Dataset {
            assets: vec![
                Asset {
                    series: s.train.clone(),
                    kinds: Some(s.train_kinds),
                },
                Asset {
                    series: s.test.clone(),
                    kinds: Some(s.test_kinds),
                },
            ],
            train: vec![s.train],
            test: vec![s.test],
        });
    }
    let mut d = Dataset {
        assets: Vec::new(),
        train: Vec::new(),
        test: Vec::new(),
    };
    for f in &cfg.data.files {
        let series = load_csv(f, &cfg.data.columns)?;
        let (train, _, test) = split(&series, &cfg.data.split)?;
        d.train.push(train);
        d.test.push(test);
        d.assets.push(Asset { series, kinds: None });
    }
    Ok(d)
}

fn tables(cfg: &RunConfig, data: &Dataset) -> Result<(Vec<WindowTable>, Vec<WindowTable>)> {
    let exp = cfg.experiment();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (a, b) in data.train.iter().zip(&data.test) {
        let t = series_tables(a, b, &exp)?;
        train.push(t.train);
        test.push(t.test);
    }
    Ok((train, test))
}

pub fn summarize(series: &BarSeries) -> AssetSummary {
    let bars = series.bars();
    let first = &bars[0];
    let last = &bars[bars.len() - 1];
    AssetSummary {
        asset: series.asset().to_string(),
        bars: bars.len(),
        first: first.date,
        last: last.date,
        first_close: first.close,
        last_close: last.close,
    }
}

fn csv_bytes(series: &BarSeries) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(series, &mut buf)?;
    Ok(buf)
}

/// Loads and checks every data file, writing normalized copies to `data/`.
pub fn ingest(cfg: &RunConfig) -> Result<RunReport> {
    if cfg.is_synthetic() {
        return Err(CommandError::Usage("ingest needs at least one file in data.files".into()));
    }
    let mut report = RunReport::new(Command::Ingest.name(), cfg);
    let dir = cfg.output.join("data");
    for f in &cfg.data.files {
        let series = load_csv(f, &cfg.data.columns)?;
        write_file(&dir, &format!("{}.csv", series.asset()), &csv_bytes(&series)?)?;
        report.assets.push(summarize(&series));
    }
    Ok(report)
}

/// Writes the synthetic suite for the first seed, with per-bar regimes.
pub fn synth(cfg: &RunConfig) -> Result<RunReport> {
    let s = synthetic_suite(&cfg.suite, cfg.seeds[0])?;
    let mut report = RunReport::new(Command::Synth.name(), cfg);
    let dir = cfg.output.join("data");
    for (series, kinds) in [(&s.train, &s.train_kinds), (&s.test, &s.test_kinds)] {
        write_file(&dir, &format!("{}.csv", series.asset()), &csv_bytes(series)?)?;
        let mut regimes = String::from("bar,date,regime\n");
        for (t, (bar, k)) in series.bars().iter().zip(kinds).enumerate() {
            let name = match k {
                RegimeKind::Up => "up",
                RegimeKind::Down => "down",
                RegimeKind::Flat => "flat",
            };
            regimes.push_str(&format!("{t},{},{name}\n", bar.date));
        }
        write_file(&dir, &format!("{}.regimes.csv", series.asset()), regimes.as_bytes())?;
        report.assets.push(summarize(series));
    }
    Ok(report)
}

/// Regime label of every evaluation horizon, with agreement against the
/// generator on synthetic data.
pub fn label(cfg: &RunConfig) -> Result<RunReport> {
    let data = load_dataset(cfg, cfg.seeds[0])?;
    let mut report = RunReport::new(Command::Label.name(), cfg);
    let w = &cfg.windows;
    for a in &data.assets {
        let c = RegimeClassifier::new(a.series.bars())?;
        let mut matches = 0;
        let mut count = 0;
        for p in window_indices(a.series.len(), w.lookback, w.horizon, w.horizon) {
            if p.horizon.start < RegimeClassifier::warmup() {
                continue;
            }
            let l = c.window(p.horizon.clone())?;
            let truth = a.kinds.as_ref().map(|k| ground_truth(k, p.horizon.clone()));
            count += 1;
            if truth == Some(l.label) {
                matches += 1;
            }
            report.labels.push(LabelRow {
                asset: a.series.asset().to_string(),
                start: p.horizon.start,
                end: p.horizon.end,
                label: l.label,
                up: l.up,
                down: l.down,
                days: l.days,
                truth,
            });
        }
        if a.kinds.is_some() {
            report.agreement.push(AgreementRow {
                asset: a.series.asset().to_string(),
                windows: count,
                matches,
                rate: if count == 0 { 0.0 } else { matches as f64 / count as f64 },
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
enum Runner {
    Action(ActionId),
    Baseline(BaselineKind),
}

impl Runner {
    fn name(self) -> String {
        match self {
            Self::Action(a) => a.name().to_string(),
            Self::Baseline(k) => k.name().to_string(),
        }
    }

    fn run(self, ctx: &Prepared, series: &BarSeries, window: Range<usize>, cfg: &RunConfig) -> Result<BacktestResult> {
        Ok(match self {
            Self::Action(a) => run_prepared(ctx, a, window, &cfg.execution)?,
            Self::Baseline(k) => run_baseline(k, series, window, &cfg.baseline_params, &cfg.execution)?,
        })
    }
}

/// One strategy's window results, chained into a curve starting at 1.
fn chain(results: &[BacktestResult]) -> Vec<f64> {
    let mut curve = vec![1.0];
    for r in results {
        let base = *curve.last().expect("non-empty");
        let e0 = r.equity[0];
        curve.extend(r.equity[1..].iter().map(|e| base * e / e0));
    }
    curve
}

/// Runs the selected strategies and baselines over consecutive
/// non-overlapping windows of every asset.
pub fn backtest(cfg: &RunConfig) -> Result<RunReport> {
    let sel = &cfg.backtest;
    let runners: Vec<Runner> = sel
        .actions
        .iter()
        .map(|a| Runner::Action(*a))
        .chain(sel.baselines.iter().map(|k| Runner::Baseline(*k)))
        .collect();
    if runners.is_empty() {
        return Err(CommandError::Usage("backtest selection is empty".into()));
    }
    let warmup = sel
        .actions
        .iter()
        .map(|a| a.warmup(&cfg.strategy))
        .chain(sel.baselines.iter().map(|k| k.warmup(&cfg.baseline_params)))
        .max()
        .unwrap_or(0);
    let data = load_dataset(cfg, cfg.seeds[0])?;
    let mut report = RunReport::new(Command::Backtest.name(), cfg);
    let w = &cfg.windows;
    for a in &data.assets {
        let series = &a.series;
        let asset = series.asset().to_string();
        let wins: Vec<Range<usize>> = window_indices(series.len(), w.lookback, w.horizon, w.horizon)
            .into_iter()
            .filter(|p| p.decision_index() >= warmup)
            .map(|p| p.decision_index()..p.horizon.end)
            .collect();
        if wins.is_empty() {
            return Err(CommandError::NoWindows {
                asset,
                lookback: w.lookback,
                horizon: w.horizon,
                warmup,
            });
        }
        let ctx = Prepared::new(series.bars(), &cfg.strategy)?;
        let results = runners
            .par_iter()
            .map(|r| wins.iter().map(|win| r.run(&ctx, series, win.clone(), cfg)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let first = wins[0].start;
        let last = wins[wins.len() - 1].end;
        let bars: Vec<usize> = (first..last).collect();
        let mut curves = Vec::with_capacity(runners.len());
        for (r, res) in runners.iter().zip(&results) {
            for (win, b) in wins.iter().zip(res) {
                report.windows.push(WindowRow {
                    asset: asset.clone(),
                    strategy: r.name(),
                    decision: win.start,
                    end: win.end,
                    metrics: b.metrics.expect("finished runs carry metrics"),
                });
            }
            let curve = chain(res);
            report.aggregate.push(AggregateRow {
                asset: asset.clone(),
                strategy: r.name(),
                windows: wins.len(),
                metrics: MetricReport::from_curve(&curve)?,
            });
            curves.push(curve);
        }
        report.equity.push(EquityCurves {
            asset,
            dates: bars.iter().map(|t| series.bars()[*t].date).collect(),
            bars,
            strategies: runners.iter().map(|r| r.name()).collect(),
            curves,
        });
    }
    Ok(report)
}

fn train_config(cfg: &RunConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.train.clone()
    }
}

/// Trains on the first seed, saves `checkpoint.json` and evaluates the
/// configured routing mode on the held-out windows.
pub fn train(cfg: &RunConfig) -> Result<RunReport> {
    let seed = cfg.seeds[0];
    let data = load_dataset(cfg, seed)?;
    let (train, test) = tables(cfg, &data)?;
    let out = train_loop(&train, &train_config(cfg, seed))?;
    write_file(&cfg.output, "checkpoint.json", out.checkpoint.to_json().as_bytes())?;
    let eval = evaluate(&out.checkpoint, &test, cfg.train.router_mode)?;
    let mut report = RunReport::new(Command::Train.name(), cfg);
    report.routing.push(RoutingRow {
        seed,
        mode: eval.mode,
        metrics: eval.metrics,
        mean_weights: eval.mean_weights,
        windows: eval.windows,
    });
    report.routing_summary = summarize_routing(&report.routing);
    report.curves.push(CurveRecord {
        seed,
        warm: out.warm,
        episodes: out.curve,
    });
    Ok(report)
}

/// Per-seed tables; CSV data does not depend on the seed and is built once.
fn seed_tables(cfg: &RunConfig) -> Result<Vec<(u64, Vec<WindowTable>, Vec<WindowTable>)>> {
    if cfg.is_synthetic() {
        cfg.seeds
            .par_iter()
            .map(|s| {
                let (a, b) = tables(cfg, &load_dataset(cfg, *s)?)?;
                Ok((*s, a, b))
            })
            .collect()
    } else {
        let (a, b) = tables(cfg, &load_dataset(cfg, cfg.seeds[0])?)?;
        Ok(cfg.seeds.iter().map(|s| (*s, a.clone(), b.clone())).collect())
    }
}

/// Trains once per seed and replays the held-out windows under all four
/// routing modes with the same experts.
pub fn cmd_ablate_routing(cfg: &RunConfig) -> Result<RunReport> {
    let exp = cfg.experiment();
    let per_seed = seed_tables(cfg)?
        .par_iter()
        .map(|(seed, train, test)| {
            let evals = ablate_routing(train, test, &exp, *seed)?;
            Ok(evals
                .into_iter()
                .map(|e| RoutingRow {
                    seed: *seed,
                    mode: e.mode,
                    metrics: e.metrics,
                    mean_weights: e.mean_weights,
                    windows: e.windows,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = RunReport::new(Command::AblateRouting.name(), cfg);
    report.routing = per_seed.into_iter().flatten().collect();
    report.routing_summary = summarize_routing(&report.routing);
    Ok(report)
}

/// Regime-prediction accuracy per observation variant and seed.
pub fn cmd_ablate_modality(cfg: &RunConfig) -> Result<RunReport> {
    let per_seed = seed_tables(cfg)?
        .par_iter()
        .map(|(seed, train, test)| {
            let rows = ablate_modality(train, test, &cfg.variants, &cfg.modality)?;
            Ok(rows.into_iter().map(|row| ModalityRecord { seed: *seed, row }).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = RunReport::new(Command::AblateModality.name(), cfg);
    report.modality = per_seed.into_iter().flatten().collect();
    Ok(report)
}

/// Reads a report back from `report.json` or a directory holding one.
pub fn read_report(input: &Path) -> Result<RunReport> {
    let path = if input.is_dir() { input.join("report.json") } else { input.to_path_buf() };
    let text = std::fs::read_to_string(&path).map_err(|e| CommandError::Report {
        path: path.clone(),
        message: e.to_string(),
    })?;
    RunReport::from_json(&text).map_err(|e| CommandError::Report {
        path,
        message: e.to_string(),
    })
}
