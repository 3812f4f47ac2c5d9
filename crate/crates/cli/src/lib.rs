//! Experiment harness behind the `spikens` binary: train ensemble members,
//! record their spike trains, then decode, combine and report.

pub mod evaluate;
pub mod pipeline;
pub mod report;

use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use spike_ensemble::io::ExperimentConfig;

pub use evaluate::{evaluate, CellRow, CellStatus, RunReport};
pub use pipeline::{cmd_record, cmd_synth, cmd_train, load_members, Split};

/// Loads records for every member, evaluates and writes the report files.
pub fn cmd_evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let (members, n_classes) = load_members(cfg, out)?;
    let report = evaluate(&members, n_classes, &cfg.evaluation);
    report::write_reports(out, cfg, &report, start.elapsed().as_secs_f64())?;
    Ok(report)
}
