//! TOML experiment configuration. Unknown keys are rejected everywhere and
//! every random stream is keyed by an explicit seed.
//!
//! ```toml
//! output_dir = "runs/desk"
//!
//! [dataset]
//! kind = "mnist"
//! dir = "../../data/mnist-5k"
//! train_limit = 3000
//! test_limit = 1000
//!
//! [network]
//! n_exc = 100
//!
//! [ensemble]
//! seeds = [1, 2, 3, 4, 5]
//!
//! [evaluation]
//! decoders = [{ name = "hmfr", window_ms = 350.0 }, { name = "bayes", window_ms = 10.0 }]
//! combiners = ["ngm", "gm", "am", "mv", "am-mv"]
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticParams;
use crate::decode::{Normalization, Prior};
use crate::error::{Error, Result};
use crate::lif::NetworkParams;
use crate::stdp::{PresentationParams, StdpParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub stdp: StdpParams,
    #[serde(default)]
    pub presentation: PresentationParams,
    pub ensemble: EnsembleConfig,
    pub evaluation: EvaluationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// IDX files named as in the MNIST distribution, optionally gzipped.
    Mnist {
        dir: PathBuf,
        train_limit: Option<usize>,
        test_limit: Option<usize>,
    },
    /// The two-class timing dataset; members are not trained, the generated
    /// records are decoded directly with a round-robin population map.
    Synthetic {
        seed: u64,
        n_neurons: usize,
        duration_ms: f64,
        n_train_per_class: usize,
        n_test_per_class: usize,
    },
    /// Externally produced spike records, one train and one test file per
    /// member.
    Records {
        train: Vec<PathBuf>,
        test: Vec<PathBuf>,
        n_classes: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_exc: usize,
    pub params: NetworkParams,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_exc: 100,
            params: NetworkParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// One seed per member.
    pub seeds: Vec<u64>,
    /// Simulations per example when recording.
    #[serde(default = "one_u32")]
    pub trials: u32,
    #[serde(default = "one_usize")]
    pub passes: usize,
}

fn one_u32() -> u32 {
    1
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    Hmfr,
    NormHmfr,
    Bayes,
    Pv,
    Cfr,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Hmfr => "hmfr",
            DecoderKind::NormHmfr => "norm-hmfr",
            DecoderKind::Bayes => "bayes",
            DecoderKind::Pv => "pv",
            DecoderKind::Cfr => "cfr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerKind {
    Ngm,
    Gm,
    Am,
    Mv,
    AmMv,
}

impl CombinerKind {
    pub fn name(self) -> &'static str {
        match self {
            CombinerKind::Ngm => "ngm",
            CombinerKind::Gm => "gm",
            CombinerKind::Am => "am",
            CombinerKind::Mv => "mv",
            CombinerKind::AmMv => "am-mv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    pub name: DecoderKind,
    pub window_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub decoders: Vec<DecoderConfig>,
    pub combiners: Vec<CombinerKind>,
    /// Target mean for the true class when scoring Poisson means.
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default)]
    pub prior: Prior,
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
}

fn default_r_max() -> f64 {
    10.0
}

fn default_normalization() -> Normalization {
    Normalization::Softmax
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving relative paths against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        match &mut self.dataset {
            DatasetConfig::Mnist { dir, .. } => fix(dir),
            DatasetConfig::Records { train, test, .. } => {
                train.iter_mut().chain(test.iter_mut()).for_each(fix)
            }
            DatasetConfig::Synthetic { .. } => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.ensemble.seeds.is_empty() {
            return bad("ensemble.seeds must list one seed per member".into());
        }
        if self.ensemble.trials == 0 {
            return bad("ensemble.trials must be at least 1".into());
        }
        if self.evaluation.decoders.is_empty() {
            return bad("evaluation.decoders is empty".into());
        }
        if let Some(d) = self
            .evaluation
            .decoders
            .iter()
            .find(|d| !(d.window_ms.is_finite() && d.window_ms > 0.0))
        {
            return bad(format!("decoder {} has window {}", d.name.name(), d.window_ms));
        }
        if !(self.evaluation.r_max.is_finite() && self.evaluation.r_max > 0.0) {
            return bad(format!("r_max must be positive, got {}", self.evaluation.r_max));
        }
        if self.network.n_exc == 0 {
            return bad("network.n_exc must be positive".into());
        }
        match &self.dataset {
            DatasetConfig::Records {
                train,
                test,
                n_classes,
            } => {
                if train.len() != self.ensemble.seeds.len() || test.len() != train.len() {
                    return bad(format!(
                        "{} seeds but {} train and {} test record files",
                        self.ensemble.seeds.len(),
                        train.len(),
                        test.len()
                    ));
                }
                if *n_classes == 0 {
                    return bad("n_classes must be positive".into());
                }
            }
            DatasetConfig::Synthetic { duration_ms, .. } if *duration_ms < 100.0 => {
                return bad(format!("synthetic duration {duration_ms} ms is below 100 ms"));
            }
            _ => {}
        }
        self.network.params.validate()?;
        self.stdp.validate()
    }

    pub fn n_members(&self) -> usize {
        self.ensemble.seeds.len()
    }

    /// Synthetic generator settings for one split.
    pub fn synthetic_split(&self, test: bool) -> Option<(SyntheticParams, u64)> {
        match &self.dataset {
            DatasetConfig::Synthetic {
                seed,
                n_neurons,
                duration_ms,
                n_train_per_class,
                n_test_per_class,
            } => {
                let n = if test { *n_test_per_class } else { *n_train_per_class };
                let split_seed = crate::seed::derive_seed(&[*seed, u64::from(test)]);
                Some((SyntheticParams::new(n, *n_neurons, *duration_ms), split_seed))
            }
            _ => None,
        }
    }
}
