//! Report files written by `evaluate`:
//!
//! - `report.csv`: one row per decoder × combiner cell
//! - `ad_terms.csv`: per-example decomposition terms of NGM and GM cells
//! - `confusion.csv`: ensemble confusion counts per cell
//! - `report.txt`: the same table formatted for reading
//! - `run_meta.json`: seeds, sizes and wall time
//!
//! Everything except `run_meta.json` is a pure function of the config and
//! the records.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use spike_ensemble::io::ExperimentConfig;

use crate::evaluate::{CellStatus, RunReport};

/// SHA-256 of the config's canonical JSON form, hex encoded. The output
/// directory is left out so a run hashes the same wherever it is written.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut cfg = cfg.clone();
    cfg.output_dir = Default::default();
    let canonical = serde_json::to_vec(&cfg)?;
    Ok(Sha256::digest(&canonical)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v}"))
}

pub fn report_csv(report: &RunReport, hash: &str) -> String {
    let mut out = String::from(
        "decoder,window_ms,combiner,status,n_test,member_accuracies,avg_member_accuracy,\
         ensemble_accuracy,ensemble_error,avg_member_error,ambiguity,residual,config_hash\n",
    );
    for r in &report.rows {
        let members = r
            .member_accuracies
            .iter()
            .map(|a| format!("{a}"))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.decoder.name(),
            r.window_ms,
            r.combiner.name(),
            r.status.label(),
            r.n_test,
            members,
            opt(r.avg_member_accuracy()),
            opt(r.ensemble_accuracy),
            opt(r.ad.map(|a| a.ensemble_error)),
            opt(r.ad.map(|a| a.avg_member_error)),
            opt(r.ad.map(|a| a.ambiguity)),
            opt(r.ad.map(|a| a.residual)),
            hash
        );
    }
    out
}

pub fn ad_terms_csv(report: &RunReport) -> String {
    let mut out =
        String::from("example_id,decoder,ensemble_error,avg_member_error,ambiguity,residual\n");
    for r in &report.rows {
        for (id, a) in &r.ad_examples {
            let _ = writeln!(
                out,
                "{id},{},{},{},{},{}",
                r.decoder.name(),
                a.ensemble_error,
                a.avg_member_error,
                a.ambiguity,
                a.residual
            );
        }
    }
    out
}

pub fn confusion_csv(report: &RunReport) -> String {
    let mut out = String::from("decoder,combiner,true_class,predicted_class,count\n");
    for r in &report.rows {
        for (t, row) in r.confusion.iter().enumerate() {
            for (p, &n) in row.iter().enumerate().filter(|(_, &n)| n > 0) {
                let _ = writeln!(out, "{},{},{t},{p},{n}", r.decoder.name(), r.combiner.name());
            }
        }
    }
    out
}

pub fn report_text(report: &RunReport) -> String {
    let mut out = format!(
        "{} members, {} classes\n\n{:<10} {:>8} {:<7} {:<8} {:>9} {:>9} {:>10} {:>10} {:>10}\n",
        report.n_members,
        report.n_classes,
        "decoder",
        "window",
        "comb",
        "status",
        "avg acc",
        "ens acc",
        "ens err",
        "avg err",
        "ambiguity"
    );
    let pct = |x: Option<f64>| x.map_or_else(|| "-".into(), |v| format!("{:.2}%", 100.0 * v));
    let num = |x: Option<f64>| x.map_or_else(|| "-".into(), |v| format!("{v:.4}"));
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:<7} {:<8} {:>9} {:>9} {:>10} {:>10} {:>10}",
            r.decoder.name(),
            format!("{}ms", r.window_ms),
            r.combiner.name(),
            r.status.label(),
            pct(r.avg_member_accuracy()),
            pct(r.ensemble_accuracy),
            num(r.ad.map(|a| a.ensemble_error)),
            num(r.ad.map(|a| a.avg_member_error)),
            num(r.ad.map(|a| a.ambiguity)),
        );
    }
    for r in &report.rows {
        if let CellStatus::Failed(why) | CellStatus::Skipped(why) = &r.status {
            let _ = writeln!(
                out,
                "\n{} × {} {}: {why}",
                r.decoder.name(),
                r.combiner.name(),
                r.status.label()
            );
        }
    }
    out
}

#[derive(Serialize)]
struct RunMeta<'a> {
    config_hash: &'a str,
    seeds: &'a [u64],
    n_exc: usize,
    trials: u32,
    n_members: usize,
    n_classes: usize,
    wall_time_s: f64,
}

pub fn write_reports(
    out: &Path,
    cfg: &ExperimentConfig,
    report: &RunReport,
    wall_time_s: f64,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let hash = config_hash(cfg)?;
    let write = |name: &str, text: String| {
        let path = out.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    write("report.csv", report_csv(report, &hash))?;
    write("ad_terms.csv", ad_terms_csv(report))?;
    write("confusion.csv", confusion_csv(report))?;
    write("report.txt", report_text(report))?;
    let meta = RunMeta {
        config_hash: &hash,
        seeds: &cfg.ensemble.seeds,
        n_exc: cfg.network.n_exc,
        trials: cfg.ensemble.trials,
        n_members: report.n_members,
        n_classes: report.n_classes,
        wall_time_s,
    };
    write("run_meta.json", serde_json::to_string_pretty(&meta)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
output_dir = "a"
[dataset]
kind = "synthetic"
seed = 1
n_neurons = 4
duration_ms = 200.0
n_train_per_class = 2
n_test_per_class = 2
[ensemble]
seeds = [0]
[evaluation]
decoders = [{ name = "hmfr", window_ms = 200.0 }]
combiners = ["am"]
"#;

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::from_toml_str(CONFIG).unwrap();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.evaluation.r_max = 11.0;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    }

    #[test]
    fn empty_report_has_headers() {
        let report = RunReport {
            rows: Vec::new(),
            n_members: 0,
            n_classes: 2,
        };
        assert_eq!(report_csv(&report, "h").lines().count(), 1);
        assert_eq!(ad_terms_csv(&report).lines().count(), 1);
        assert!(confusion_csv(&report).starts_with("decoder,combiner,true_class"));
    }
}
