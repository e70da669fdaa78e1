//! Run reports and their tabular renderings.
//!
//! A [`RunReport`] is the single JSON artifact of a command. Every CSV, TSV
//! and markdown table is rendered from it, so no emitted number is missing
//! from the JSON. Percentages carry two decimals; raw values use the
//! shortest round-trip form.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::experiment::ModalityRow;
use crate::metrics::{pct, MetricReport};
use crate::regime::RegimeLabel;
use crate::router::{RouterMode, N_EXPERTS};
use crate::training::{EpisodeRecord, WarmStartReport};

/// Shortest round-trip decimal form, so emitted numbers parse back exactly.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

/// SHA-256 of the crate sources at build time.
pub fn code_hash() -> &'static str {
    env!("MOE_TRADER_CODE_HASH")
}

fn fmt_sharpe(s: Option<f64>) -> String {
    s.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

/// Metrics of one strategy over one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub asset: String,
    pub strategy: String,
    pub decision: usize,
    pub end: usize,
    pub metrics: MetricReport,
}

/// Metrics of a strategy's window curves chained end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub asset: String,
    pub strategy: String,
    pub windows: usize,
    pub metrics: MetricReport,
}

/// Chained equity per strategy on a shared bar axis, starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityCurves {
    pub asset: String,
    pub bars: Vec<usize>,
    pub dates: Vec<NaiveDate>,
    pub strategies: Vec<String>,
    /// `curves[s][i]` is strategy `s` at `bars[i]`.
    pub curves: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingRow {
    pub seed: u64,
    pub mode: RouterMode,
    pub metrics: MetricReport,
    pub mean_weights: [f64; N_EXPERTS],
    pub windows: usize,
}

/// Cross-seed means per routing mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingSummary {
    pub mode: RouterMode,
    pub seeds: usize,
    pub total_return: f64,
    /// Mean over seeds with a defined Sharpe; `None` when none has one.
    pub sharpe: Option<f64>,
    pub max_drawdown: f64,
    /// Seeds on which this mode's TR beats Uniform's.
    pub beats_uniform: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityRecord {
    pub seed: u64,
    pub row: ModalityRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub asset: String,
    pub start: usize,
    pub end: usize,
    pub label: RegimeLabel,
    pub up: usize,
    pub down: usize,
    pub days: usize,
    /// Generator label, for synthetic series.
    pub truth: Option<RegimeLabel>,
}

/// Shape of one ingested or generated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSummary {
    pub asset: String,
    pub bars: usize,
    pub first: NaiveDate,
    pub last: NaiveDate,
    pub first_close: f64,
    pub last_close: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub asset: String,
    pub windows: usize,
    pub matches: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub seed: u64,
    pub warm: Option<WarmStartReport>,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub code_hash: String,
    pub assets: Vec<AssetSummary>,
    pub windows: Vec<WindowRow>,
    pub aggregate: Vec<AggregateRow>,
    pub equity: Vec<EquityCurves>,
    pub routing: Vec<RoutingRow>,
    pub routing_summary: Vec<RoutingSummary>,
    pub modality: Vec<ModalityRecord>,
    pub labels: Vec<LabelRow>,
    pub agreement: Vec<AgreementRow>,
    pub curves: Vec<CurveRecord>,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            config_hash: config.hash(),
            code_hash: code_hash().to_string(),
            ..Self::default()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Every non-empty table, in a fixed order, keyed by file stem.
    pub fn tables(&self) -> Vec<(&'static str, Table)> {
        let mut out = Vec::new();
        if !self.assets.is_empty() {
            out.push(("assets", asset_table(&self.assets)));
        }
        if !self.aggregate.is_empty() {
            out.push(("aggregate", aggregate_table(&self.aggregate)));
        }
        if !self.windows.is_empty() {
            out.push(("windows", window_table(&self.windows)));
        }
        if !self.routing_summary.is_empty() {
            out.push(("routing", routing_table(&self.routing_summary)));
            out.push(("routing_seeds", routing_seed_table(&self.routing)));
        }
        if !self.modality.is_empty() {
            out.push(("modality", modality_table(&self.modality)));
        }
        if !self.agreement.is_empty() {
            out.push(("agreement", agreement_table(&self.agreement)));
        }
        if !self.labels.is_empty() {
            out.push(("labels", label_table(&self.labels)));
        }
        out
    }

    /// Markdown rendering of all tables under a header naming the config and
    /// code hashes.
    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "# {}\n\nconfig hash `{}`\ncode hash `{}`\n",
            self.command, self.config_hash, self.code_hash
        );
        for (name, t) in self.tables() {
            s.push_str(&format!("\n## {name}\n\n{}", t.to_markdown()));
        }
        s
    }

    /// Writes `report.json`, `report.md`, one CSV per table and the
    /// gnuplot-ready TSV plot files into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> std::io::Result<()> {
            std::fs::write(dir.join(&name), body)?;
            written.push(name);
            Ok(())
        };
        put("report.json".into(), self.to_json())?;
        put("report.md".into(), self.to_markdown())?;
        for (name, t) in self.tables() {
            put(format!("{name}.csv"), t.to_csv())?;
        }
        for e in &self.equity {
            put(format!("equity_{}.csv", e.asset), equity_table(e, false).to_csv())?;
            put(format!("equity_{}.tsv", e.asset), equity_table(e, true).to_tsv())?;
        }
        for c in &self.curves {
            put(format!("curve_seed{}.tsv", c.seed), curve_table(&c.episodes).to_tsv())?;
        }
        Ok(written)
    }
}

/// A header row plus string cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    /// Tab-separated with a `#`-prefixed header, as gnuplot expects.
    pub fn to_tsv(&self) -> String {
        let mut s = format!("# {}\n", self.columns.join("\t"));
        for r in &self.rows {
            s.push_str(&r.join("\t"));
            s.push('\n');
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("| {} |\n", self.columns.join(" | "));
        s.push_str(&format!("|{}\n", "---|".repeat(self.columns.len())));
        for r in &self.rows {
            s.push_str(&format!("| {} |\n", r.join(" | ")));
        }
        s
    }
}

pub fn asset_table(rows: &[AssetSummary]) -> Table {
    let mut t = Table::new(&["asset", "bars", "first", "last", "first_close", "last_close"]);
    for r in rows {
        t.push(vec![
            r.asset.clone(),
            r.bars.to_string(),
            r.first.to_string(),
            r.last.to_string(),
            fmt_num(r.first_close),
            fmt_num(r.last_close),
        ]);
    }
    t
}

pub fn agreement_table(rows: &[AgreementRow]) -> Table {
    let mut t = Table::new(&["asset", "windows", "matches", "agreement%"]);
    for r in rows {
        t.push(vec![r.asset.clone(), r.windows.to_string(), r.matches.to_string(), pct(r.rate)]);
    }
    t
}

pub fn aggregate_table(rows: &[AggregateRow]) -> Table {
    let mut t = Table::new(&["asset", "strategy", "windows", "TR%", "SR", "MDD%"]);
    for r in rows {
        t.push(vec![
            r.asset.clone(),
            r.strategy.clone(),
            r.windows.to_string(),
            pct(r.metrics.total_return),
            fmt_sharpe(r.metrics.sharpe),
            pct(r.metrics.max_drawdown),
        ]);
    }
    t
}

pub fn window_table(rows: &[WindowRow]) -> Table {
    let mut t = Table::new(&["asset", "strategy", "decision", "end", "total_return", "sharpe", "max_drawdown"]);
    for r in rows {
        t.push(vec![
            r.asset.clone(),
            r.strategy.clone(),
            r.decision.to_string(),
            r.end.to_string(),
            fmt_num(r.metrics.total_return),
            r.metrics.sharpe.map_or_else(String::new, fmt_num),
            fmt_num(r.metrics.max_drawdown),
        ]);
    }
    t
}

/// Mode, TR%, SR, MDD%: the layout of a routing comparison.
pub fn routing_table(rows: &[RoutingSummary]) -> Table {
    let mut t = Table::new(&["mode", "seeds", "TR%", "SR", "MDD%", "beats_uniform"]);
    for r in rows {
        t.push(vec![
            r.mode.name().to_string(),
            r.seeds.to_string(),
            pct(r.total_return),
            fmt_sharpe(r.sharpe),
            pct(r.max_drawdown),
            r.beats_uniform.to_string(),
        ]);
    }
    t
}

pub fn routing_seed_table(rows: &[RoutingRow]) -> Table {
    let mut t = Table::new(&["seed", "mode", "TR%", "SR", "MDD%", "w_trend", "w_reversal", "w_breakout", "w_position"]);
    for r in rows {
        let mut row = vec![
            r.seed.to_string(),
            r.mode.name().to_string(),
            pct(r.metrics.total_return),
            fmt_sharpe(r.metrics.sharpe),
            pct(r.metrics.max_drawdown),
        ];
        row.extend(r.mean_weights.iter().map(|w| format!("{w:.4}")));
        t.push(row);
    }
    t
}

pub fn modality_table(rows: &[ModalityRecord]) -> Table {
    let mut t = Table::new(&["seed", "variant", "accuracy%", "train_accuracy%", "majority%"]);
    for r in rows {
        t.push(vec![
            r.seed.to_string(),
            r.row.variant.name().to_string(),
            pct(r.row.accuracy),
            pct(r.row.train_accuracy),
            pct(r.row.majority_rate),
        ]);
    }
    t
}

pub fn label_table(rows: &[LabelRow]) -> Table {
    let mut t = Table::new(&["asset", "start", "end", "label", "up", "down", "days", "truth"]);
    for r in rows {
        t.push(vec![
            r.asset.clone(),
            r.start.to_string(),
            r.end.to_string(),
            r.label.name().to_string(),
            r.up.to_string(),
            r.down.to_string(),
            r.days.to_string(),
            r.truth.map_or_else(String::new, |l| l.name().to_string()),
        ]);
    }
    t
}

/// `bar, date, <strategy>...`; the TSV form drops the date column.
pub fn equity_table(e: &EquityCurves, plot: bool) -> Table {
    let mut cols = vec!["bar"];
    if !plot {
        cols.push("date");
    }
    cols.extend(e.strategies.iter().map(String::as_str));
    let mut t = Table::new(&cols);
    for (i, bar) in e.bars.iter().enumerate() {
        let mut row = vec![bar.to_string()];
        if !plot {
            row.push(e.dates[i].to_string());
        }
        row.extend(e.curves.iter().map(|c| fmt_num(c[i])));
        t.push(row);
    }
    t
}

pub fn curve_table(rows: &[EpisodeRecord]) -> Table {
    let mut t = Table::new(&[
        "episode",
        "reward",
        "aggregated_return",
        "w_trend",
        "w_reversal",
        "w_breakout",
        "w_position",
        "router_loss",
    ]);
    for r in rows {
        let mut row = vec![r.episode.to_string(), fmt_num(r.reward), fmt_num(r.aggregated_return)];
        row.extend(r.mean_weights.iter().map(|w| fmt_num(*w)));
        row.push(fmt_num(r.router_loss));
        t.push(row);
    }
    t
}

/// Cross-seed means per mode, in [`RouterMode::ALL`] order.
pub fn summarize_routing(rows: &[RoutingRow]) -> Vec<RoutingSummary> {
    RouterMode::ALL
        .iter()
        .filter_map(|mode| {
            let mine: Vec<&RoutingRow> = rows.iter().filter(|r| r.mode == *mode).collect();
            if mine.is_empty() {
                return None;
            }
            let n = mine.len() as f64;
            let sharpes: Vec<f64> = mine.iter().filter_map(|r| r.metrics.sharpe).collect();
            let beats_uniform = mine
                .iter()
                .filter(|r| {
                    rows.iter()
                        .find(|u| u.seed == r.seed && u.mode == RouterMode::Uniform)
                        .is_some_and(|u| r.metrics.total_return > u.metrics.total_return)
                })
                .count();
            Some(RoutingSummary {
                mode: *mode,
                seeds: mine.len(),
                total_return: mine.iter().map(|r| r.metrics.total_return).sum::<f64>() / n,
                sharpe: (!sharpes.is_empty()).then(|| sharpes.iter().sum::<f64>() / sharpes.len() as f64),
                max_drawdown: mine.iter().map(|r| r.metrics.max_drawdown).sum::<f64>() / n,
                beats_uniform,
            })
        })
        .collect()
}
