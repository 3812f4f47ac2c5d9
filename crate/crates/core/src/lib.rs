//! Spiking-network simulation, spike-train decoding and ensemble combination.
//!
//! The crate is organised by stage:
//!
//! - [`lif`] and [`stdp`] simulate and train a winner-take-all network of
//!   conductance-based LIF neurons on Poisson-encoded images.
//! - [`decode`] turns output spike trains into class scores, probabilities or
//!   per-window Poisson means.
//! - [`combine`] fuses the decoded outputs of several ensemble members.
//! - [`ambiguity`] splits the ensemble error into average member error minus
//!   ambiguity, for squared, categorical and Poisson losses.
//! - [`io`] reads IDX datasets and handles records, models and configs.

pub mod ambiguity;
pub mod combine;
pub mod decode;
pub mod error;
pub mod io;
pub mod lif;
pub mod seed;
pub mod spike;
pub mod stdp;

pub use error::{Error, Result};
pub use spike::{
    ClassProbabilities, PoissonMeans, PopulationMap, RateMatrix, SpikeRecord, SpikeTrain,
    WindowSpec, LAMBDA_FLOOR,
};
