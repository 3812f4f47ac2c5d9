//! Dataset ingestion and serialization: MNIST IDX files, spike-record files,
//! model files, the synthetic timing dataset and experiment configs.

use serde::{Deserialize, Serialize};

pub mod config;
pub mod idx;
pub mod model;
pub mod records;
pub mod synthetic;

pub use config::ExperimentConfig;
pub use idx::{read_idx, read_mnist_dir};
pub use model::{load_model, save_model, Model, TrainedMember};
pub use records::{read_records, write_records};
pub use synthetic::{synthetic_temporal, SyntheticParams};

/// Pixels per image.
pub const IMAGE_PIXELS: usize = 28 * 28;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledImage {
    pub pixels: Vec<u8>,
    pub label: u8,
}
