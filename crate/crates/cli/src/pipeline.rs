//! Training and recording stages, plus loading of whatever the evaluation
//! stage needs from disk.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use spike_ensemble::io::config::DatasetConfig;
use spike_ensemble::io::{
    read_mnist_dir, read_records, write_records, ExperimentConfig, LabeledImage, Model,
    TrainedMember, IMAGE_PIXELS,
};
use spike_ensemble::lif::{build_diehl_cook, poisson_encode};
use spike_ensemble::seed::derive_seed;
use spike_ensemble::spike::{PopulationMap, SpikeRecord};
use spike_ensemble::stdp::{assign_classes, assign_from_responses, train_unsupervised};

pub const MNIST_CLASSES: usize = 10;

const INIT_STREAM: u64 = 0x696e_6974;
const RECORD_STREAM: u64 = 0x7265_636f;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

pub fn model_path(out: &Path, member: usize) -> PathBuf {
    out.join("models").join(format!("member_{member}.json"))
}

pub fn records_path(out: &Path, member: usize, split: Split) -> PathBuf {
    out.join("records")
        .join(format!("member_{member}_{}.ndjson", split.name()))
}

/// Train and test images of an MNIST dataset config, each capped at
/// `limit` when given.
pub fn load_images(
    cfg: &ExperimentConfig,
    limit: Option<usize>,
) -> Result<(Vec<LabeledImage>, Vec<LabeledImage>)> {
    let DatasetConfig::Mnist {
        dir,
        train_limit,
        test_limit,
    } = &cfg.dataset
    else {
        bail!("this stage needs an MNIST dataset config");
    };
    let cap = |l: Option<usize>| match (l, limit) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let train = read_mnist_dir(dir, "train", cap(*train_limit))
        .with_context(|| format!("reading training images from {}", dir.display()))?;
    let test = read_mnist_dir(dir, "t10k", cap(*test_limit))
        .with_context(|| format!("reading test images from {}", dir.display()))?;
    Ok((train, test))
}

/// Builds, trains and labels one ensemble member.
pub fn train_member(cfg: &ExperimentConfig, seed: u64, train: &[LabeledImage]) -> Result<TrainedMember> {
    let mut network = build_diehl_cook(
        IMAGE_PIXELS,
        cfg.network.n_exc,
        &cfg.network.params,
        derive_seed(&[seed, INIT_STREAM]),
    )?;
    let stats = train_unsupervised(
        &mut network,
        train,
        cfg.ensemble.passes,
        &cfg.presentation,
        &cfg.stdp,
        seed,
    )?;
    log::info!(
        "member seed {seed}: {} presentations, {} output spikes, {} silent",
        stats.examples,
        stats.output_spikes,
        stats.silent_examples
    );
    let assignment = assign_classes(&network, train, &cfg.presentation, MNIST_CLASSES, seed)?;
    if !assignment.silent.is_empty() {
        log::warn!(
            "member seed {seed}: {} neurons never fired during assignment",
            assignment.silent.len()
        );
    }
    Ok(TrainedMember {
        seed,
        network,
        assignment,
    })
}

/// Trains every member (in parallel) and writes `models/member_{m}.json`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, limit: Option<usize>) -> Result<Vec<PathBuf>> {
    let (train, _) = load_images(cfg, limit)?;
    fs::create_dir_all(out.join("models"))?;
    cfg.ensemble
        .seeds
        .par_iter()
        .enumerate()
        .map(|(m, &seed)| {
            let member = train_member(cfg, seed, &train)
                .with_context(|| format!("training member {m} (seed {seed})"))?;
            let path = model_path(out, m);
            spike_ensemble::io::save_model(&path, &Model::Member(Box::new(member)))?;
            Ok(path)
        })
        .collect()
}

pub fn load_member(path: &Path) -> Result<TrainedMember> {
    match spike_ensemble::io::load_model(path)
        .with_context(|| format!("loading {}", path.display()))?
    {
        Model::Member(m) => Ok(*m),
        _ => bail!("{} does not hold a trained member", path.display()),
    }
}

/// Simulates `trials` presentations of every image with plasticity off.
pub fn record_member(
    cfg: &ExperimentConfig,
    member: &TrainedMember,
    images: &[LabeledImage],
    split: Split,
) -> Result<Vec<SpikeRecord>> {
    let p = &cfg.presentation;
    let per_example: Vec<Vec<SpikeRecord>> = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            (0..cfg.ensemble.trials)
                .map(|k| {
                    let s = derive_seed(&[member.seed, RECORD_STREAM, split.tag(), i as u64, u64::from(k)]);
                    let input = poisson_encode(&img.pixels, p.max_rate_hz, p.duration_ms, s)?;
                    let mut rec = member.network.simulate_frozen(&input, p.duration_ms, p.dt_ms)?;
                    rec.example_id = format!("{}-{i}", split.name());
                    rec.trial_index = k;
                    rec.label = Some(usize::from(img.label));
                    Ok(rec)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_example.into_iter().flatten().collect())
}

/// Writes `records/member_{m}_{split}.ndjson` for every trained member.
pub fn cmd_record(
    cfg: &ExperimentConfig,
    out: &Path,
    split: Split,
    limit: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let (train, test) = load_images(cfg, limit)?;
    let images = match split {
        Split::Train => &train,
        Split::Test => &test,
    };
    fs::create_dir_all(out.join("records"))?;
    (0..cfg.n_members())
        .map(|m| {
            let member = load_member(&model_path(out, m))?;
            let records = record_member(cfg, &member, images, split)?;
            let path = records_path(out, m, split);
            write_records(&path, &records)?;
            Ok(path)
        })
        .collect()
}

/// Writes the synthetic train and test records as member 0's record files.
pub fn cmd_synth(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out.join("records"))?;
    [Split::Train, Split::Test]
        .into_iter()
        .map(|split| {
            let (params, seed) = cfg
                .synthetic_split(split == Split::Test)
                .context("the synth command needs a synthetic dataset config")?;
            let mut records = params.generate(seed)?;
            for r in &mut records {
                r.example_id = format!("{}-{}", split.name(), r.example_id);
            }
            let path = records_path(out, 0, split);
            write_records(&path, &records)?;
            Ok(path)
        })
        .collect()
}

/// Records and population map of one member, ready for evaluation.
#[derive(Clone, Debug)]
pub struct MemberData {
    pub train: Vec<SpikeRecord>,
    pub test: Vec<SpikeRecord>,
    pub population: PopulationMap,
}

/// Population map from mean total counts per class over training records.
pub fn assign_from_records(records: &[SpikeRecord], n_classes: usize) -> Result<PopulationMap> {
    let n = records.first().map_or(0, SpikeRecord::n_neurons);
    let responses: Vec<(usize, Vec<f64>)> = records
        .iter()
        .map(|r| {
            let label = r
                .label
                .with_context(|| format!("training record {} has no label", r.example_id))?;
            Ok((label, r.trains.iter().map(|t| t.len() as f64).collect()))
        })
        .collect::<Result<_>>()?;
    Ok(assign_from_responses(&responses, n, n_classes)?.map)
}

/// Loads every member's records and population map for `cmd_evaluate`.
/// Returns the members and the number of classes.
pub fn load_members(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<MemberData>, usize)> {
    let read = |p: &Path| read_records(p).with_context(|| format!("reading {}", p.display()));
    match &cfg.dataset {
        DatasetConfig::Mnist { .. } => {
            let members = (0..cfg.n_members())
                .map(|m| {
                    let member = load_member(&model_path(out, m))?;
                    Ok(MemberData {
                        train: read(&records_path(out, m, Split::Train))?,
                        test: read(&records_path(out, m, Split::Test))?,
                        population: member.assignment.map,
                    })
                })
                .collect::<Result<_>>()?;
            Ok((members, MNIST_CLASSES))
        }
        DatasetConfig::Synthetic { n_neurons, .. } => {
            let member = MemberData {
                train: read(&records_path(out, 0, Split::Train))?,
                test: read(&records_path(out, 0, Split::Test))?,
                population: PopulationMap::round_robin(*n_neurons, 2),
            };
            Ok((vec![member], 2))
        }
        DatasetConfig::Records {
            train,
            test,
            n_classes,
        } => {
            let members = train
                .iter()
                .zip(test)
                .map(|(tr, te)| {
                    let train = read(tr)?;
                    let population = assign_from_records(&train, *n_classes)?;
                    Ok(MemberData {
                        train,
                        test: read(te)?,
                        population,
                    })
                })
                .collect::<Result<_>>()?;
            Ok((members, *n_classes))
        }
    }
}
