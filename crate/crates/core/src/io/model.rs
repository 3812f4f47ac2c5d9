//! Versioned JSON model files for trained networks and fitted decoders.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decode::{BayesModel, PvModel};
use crate::error::{Error, Result};
use crate::lif::LifNetwork;
use crate::stdp::ClassAssignment;

pub const MODEL_FORMAT: &str = "spike-ensemble-model";
pub const MODEL_VERSION: u32 = 1;

/// One trained ensemble member: its seed, network and class assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedMember {
    pub seed: u64,
    pub network: LifNetwork,
    pub assignment: ClassAssignment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Model {
    Member(Box<TrainedMember>),
    Bayes(BayesModel),
    Pv(PvModel),
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format: &'static str,
    version: u32,
    model: &'a Model,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    model: Model,
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    serde_json::to_vec(&EnvelopeOut {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        model,
    })
    .map_err(|e| Error::Format {
        kind: "model",
        detail: e.to_string(),
    })
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    let corrupt = |e: serde_json::Error| Error::Format {
        kind: "model",
        detail: e.to_string(),
    };
    let header: Header = serde_json::from_slice(bytes).map_err(corrupt)?;
    if header.format != MODEL_FORMAT {
        return Err(Error::Format {
            kind: "model",
            detail: format!("unknown format tag {:?}", header.format),
        });
    }
    if header.version != MODEL_VERSION {
        return Err(Error::Version {
            found: header.version,
            expected: MODEL_VERSION,
        });
    }
    let env: EnvelopeIn = serde_json::from_slice(bytes).map_err(corrupt)?;
    Ok(env.model)
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
