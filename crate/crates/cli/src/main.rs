use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use spike_ensemble::io::config::CombinerKind;
use spike_ensemble::io::records::read_records_unchecked;
use spike_ensemble::io::ExperimentConfig;
use spike_ensemble::spike::validate_record;
use spike_ensemble_cli::{cmd_evaluate, cmd_record, cmd_synth, cmd_train, Split};

#[derive(Parser)]
#[command(name = "spikens", version, about = "Spiking-network ensembles: train, record, decode, combine")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Number of ensemble members.
    #[arg(long, global = true)]
    members: Option<usize>,

    /// First member seed; members get S, S+1, ...
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap on training and test examples.
    #[arg(long, global = true)]
    limit: Option<usize>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every ensemble member and assign classes.
    Train,
    /// Simulate trained members with plasticity off and write spike records.
    Record {
        #[arg(long, value_enum, default_value = "both")]
        split: SplitArg,
    },
    /// Decode, combine and write the report files.
    Evaluate,
    /// Evaluate only the NGM and GM cells and print their decomposition terms.
    AdReport,
    /// Generate the synthetic timing dataset as spike records.
    Synth,
    /// Check spike-record files and list every violation.
    Validate { files: Vec<PathBuf> },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    Both,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().context("--config is required")?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let m = cli.members.unwrap_or(cfg.ensemble.seeds.len());
    if let Some(s) = cli.seed {
        cfg.ensemble.seeds = (0..m as u64).map(|k| s + k).collect();
    } else if m != cfg.ensemble.seeds.len() {
        let last = *cfg.ensemble.seeds.last().unwrap_or(&0);
        cfg.ensemble.seeds.truncate(m);
        while cfg.ensemble.seeds.len() < m {
            let next = last + (cfg.ensemble.seeds.len() as u64) + 1;
            cfg.ensemble.seeds.push(next);
        }
    }
    if let (Some(limit), spike_ensemble::io::config::DatasetConfig::Mnist { train_limit, test_limit, .. }) =
        (cli.limit, &mut cfg.dataset)
    {
        *train_limit = Some(train_limit.map_or(limit, |l| l.min(limit)));
        *test_limit = Some(test_limit.map_or(limit, |l| l.min(limit)));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    if let Command::Validate { files } = &cli.command {
        let mut clean = true;
        for f in files {
            match read_records_unchecked(f) {
                Ok(records) => {
                    let mut bad = 0;
                    for r in &records {
                        for v in validate_record(r) {
                            bad += 1;
                            println!("{}: {} trial {}: {v}", f.display(), r.example_id, r.trial_index);
                        }
                    }
                    clean &= bad == 0;
                    println!("{}: {} records, {bad} violations", f.display(), records.len());
                }
                Err(e) => {
                    clean = false;
                    println!("{}: {e}", f.display());
                }
            }
        }
        return Ok(clean);
    }
    let cfg = load_config(&cli)?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Train => {
            for p in cmd_train(&cfg, &out, None)? {
                println!("{}", p.display());
            }
        }
        Command::Record { split } => {
            let splits: &[Split] = match split {
                SplitArg::Train => &[Split::Train],
                SplitArg::Test => &[Split::Test],
                SplitArg::Both => &[Split::Train, Split::Test],
            };
            for &s in splits {
                for p in cmd_record(&cfg, &out, s, None)? {
                    println!("{}", p.display());
                }
            }
        }
        Command::Evaluate => {
            let report = cmd_evaluate(&cfg, &out)?;
            print!("{}", spike_ensemble_cli::report::report_text(&report));
            return Ok(report.all_completed());
        }
        Command::AdReport => {
            let mut cfg = cfg;
            cfg.evaluation
                .combiners
                .retain(|c| matches!(c, CombinerKind::Ngm | CombinerKind::Gm));
            if cfg.evaluation.combiners.is_empty() {
                bail!("the config lists neither the ngm nor the gm combiner");
            }
            let report = cmd_evaluate(&cfg, &out)?;
            println!("decoder,combiner,ensemble_error,avg_member_error,ambiguity,residual");
            for r in report.rows.iter() {
                if let Some(a) = r.ad {
                    println!(
                        "{},{},{:.6},{:.6},{:.6},{:.3e}",
                        r.decoder.name(),
                        r.combiner.name(),
                        a.ensemble_error,
                        a.avg_member_error,
                        a.ambiguity,
                        a.residual
                    );
                }
            }
            return Ok(report.all_completed());
        }
        Command::Synth => {
            for p in cmd_synth(&cfg, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Validate { .. } => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
