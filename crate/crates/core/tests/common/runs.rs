//! Small end-to-end configurations and output-directory comparison.

use std::collections::BTreeMap;
use std::path::Path;

use moe_trader::commands::{execute, Command};
use moe_trader::config::RunConfig;

/// Synthetic config small enough for a few seconds per command.
pub fn small_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.suite.train_bars = 700;
    cfg.suite.test_bars = 500;
    cfg.train.episodes = 6;
    cfg.modality.epochs = 40;
    cfg.seeds = vec![3, 4];
    cfg.output = out.to_path_buf();
    cfg
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub const ALL_SYNTHETIC: [Command; 6] = [
    Command::Synth,
    Command::Label,
    Command::Backtest,
    Command::Train,
    Command::AblateRouting,
    Command::AblateModality,
];

/// Runs `cmd` twice into the same (emptied) directory and compares every byte.
pub fn check_rerun(cmd: Command, cfg: &RunConfig) {
    let mut runs = Vec::new();
    for _ in 0..2 {
        if cfg.output.exists() {
            std::fs::remove_dir_all(&cfg.output).unwrap();
        }
        execute(cmd, cfg).unwrap();
        runs.push(snapshot(&cfg.output));
    }
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0].keys().collect::<Vec<_>>(), runs[1].keys().collect::<Vec<_>>(), "{}: file sets", cmd.name());
    for (name, bytes) in &runs[0] {
        assert!(bytes == &runs[1][name], "{}: {name} differs between runs", cmd.name());
    }
}
