use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use moe_trader::baselines::BaselineKind;
use moe_trader::commands::{execute, read_report, write_report, Command, CommandError};
use moe_trader::config::{ConfigError, RunConfig};
use moe_trader::report::RunReport;
use moe_trader::router::RouterMode;
use moe_trader::strategy::ActionId;
use moe_trader::training::WarmStartConfig;

/// Multi-strategy backtester with a routed mixture of trading experts.
///
/// Exit codes: 0 ok, 2 configuration error, 3 runtime abort.
#[derive(Parser)]
#[command(name = "moe-trader", version)]
struct Cli {
    /// Run configuration (.toml or .json); defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; repeat to run several.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    /// OHLCV CSV file; repeat for several assets. Replaces data.files.
    #[arg(long = "data", global = true)]
    data: Vec<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load and validate CSV files, writing normalized copies.
    Ingest,
    /// Generate the synthetic three-regime suite.
    Synth,
    /// Label evaluation windows with market regimes.
    Label,
    /// Run strategies and rule baselines over consecutive windows.
    Backtest {
        /// Run only this rule baseline (b&h, macd, kdj-rsi, cr, bbi, wr, bias); repeatable.
        #[arg(long = "baseline", value_parser = parse_baseline)]
        baselines: Vec<BaselineKind>,
        /// Run only this strategy (a1..a11 or its name); repeatable.
        #[arg(long = "action", value_parser = parse_action)]
        actions: Vec<ActionId>,
    },
    /// Compare Dynamic, Uniform, BestExpert and Random routing.
    AblateRouting {
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Compare regime-prediction accuracy across observation variants.
    AblateModality,
    /// Train experts and router, saving a checkpoint and learning curve.
    Train {
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_parser = parse_mode)]
        router_mode: Option<RouterMode>,
        /// Pre-train the router on regime labels before the main loop.
        #[arg(long)]
        warm_start: bool,
    },
    /// Re-render tables from an existing report.
    Report {
        /// A report.json or the directory holding it; defaults to the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn parse_baseline(s: &str) -> Result<BaselineKind, String> {
    s.parse().map_err(|e: moe_trader::baselines::BaselineError| e.to_string())
}

fn parse_action(s: &str) -> Result<ActionId, String> {
    s.parse().map_err(|e: moe_trader::strategy::StrategyError| e.to_string())
}

fn parse_mode(s: &str) -> Result<RouterMode, String> {
    s.parse().map_err(|e: moe_trader::router::RouterError| e.to_string())
}

fn build_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    if !cli.seeds.is_empty() {
        cfg.seeds = cli.seeds.clone();
    }
    if !cli.data.is_empty() {
        cfg.data.files = cli.data.clone();
    }
    match &cli.command {
        Cmd::Backtest { baselines, actions } if !baselines.is_empty() || !actions.is_empty() => {
            cfg.backtest.baselines = baselines.clone();
            cfg.backtest.actions = actions.clone();
        }
        Cmd::AblateRouting { episodes: Some(n) } => cfg.train.episodes = *n,
        Cmd::Train {
            episodes,
            router_mode,
            warm_start,
        } => {
            if let Some(n) = episodes {
                cfg.train.episodes = *n;
            }
            if let Some(m) = router_mode {
                cfg.train.router_mode = *m;
            }
            if *warm_start && cfg.train.warm_start.is_none() {
                cfg.train.warm_start = Some(WarmStartConfig::default());
            }
        }
        _ => {}
    }
    Ok(cfg)
}

/// Summary tables only; per-window rows stay in the files.
fn print_summary(report: &RunReport, dir: &std::path::Path) {
    println!("{} -> {}", report.command, dir.display());
    for (name, t) in report.tables() {
        if name != "windows" && name != "labels" {
            println!("\n{name}\n{}", t.to_markdown());
        }
    }
}

fn run(cli: &Cli) -> Result<(), CommandError> {
    let cfg = build_config(cli)?;
    let cmd = match &cli.command {
        Cmd::Ingest => Command::Ingest,
        Cmd::Synth => Command::Synth,
        Cmd::Label => Command::Label,
        Cmd::Backtest { .. } => Command::Backtest,
        Cmd::AblateRouting { .. } => Command::AblateRouting,
        Cmd::AblateModality => Command::AblateModality,
        Cmd::Train { .. } => Command::Train,
        Cmd::Report { input } => {
            let input = input.clone().unwrap_or_else(|| cfg.output.clone());
            let report = read_report(&input)?;
            let dir = if input.is_dir() {
                input
            } else {
                input.parent().map(PathBuf::from).unwrap_or_default()
            };
            let dir = cli.out.clone().unwrap_or(dir);
            write_report(&report, &dir)?;
            print!("{}", report.to_markdown());
            return Ok(());
        }
    };
    let report = execute(cmd, &cfg)?;
    print_summary(&report, &cfg.output);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
