//! Writes a generated series to CSV, loads it back the way `ingest` does,
//! labels its windows and backtests the rule baselines on it.
//!
//! cargo run --example csv_backtest -- [path/to/ohlcv.csv]

use moe_trader::backtest::ExecutionConfig;
use moe_trader::baselines::{run_baseline, BaselineKind, BaselineParams};
use moe_trader::market_data::{load_csv, synth_generate, window_indices, write_csv, ColumnMapping, SynthConfig};
use moe_trader::metrics::pct;
use moe_trader::regime::RegimeClassifier;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let p = std::env::temp_dir().join("moe_trader_example.csv");
            let series = synth_generate(&SynthConfig { n_bars: 600, ..SynthConfig::default() })?;
            write_csv(&series, std::fs::File::create(&p)?)?;
            p
        }
    };
    let series = load_csv(&path, &ColumnMapping::default())?;
    println!("{}: {} bars from {}", series.asset(), series.len(), path.display());

    let labels = RegimeClassifier::new(series.bars())?;
    let params = BaselineParams::default();
    let cfg = ExecutionConfig::default();
    println!("\n{:>5} {:>5} {:<14} {}", "from", "to", "regime", "TR% per baseline");
    for w in window_indices(series.len(), 100, 90, 90) {
        let label = labels.window(w.horizon.clone())?.label;
        let window = w.decision_index()..w.horizon.end;
        let trs = BaselineKind::ALL
            .iter()
            .map(|k| Ok(format!("{} {}", k.name(), pct(run_baseline(*k, &series, window.clone(), &params, &cfg)?.total_return()))))
            .collect::<Result<Vec<_>, moe_trader::baselines::BaselineError>>()?;
        println!("{:>5} {:>5} {:<14} {}", window.start, window.end, label.name(), trs.join(", "));
    }
    Ok(())
}
