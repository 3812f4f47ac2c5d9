//! Two-class dataset whose classes differ only in spike timing.
//!
//! Every neuron emits the same expected number of spikes for both classes.
//! Class 0 puts most of them in the first half of the interval, class 1 in
//! the second half, so whole-interval counts carry no class information
//! while short windows do.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lif::poisson_times;
use crate::seed::{derive_seed, rng};
use crate::spike::{SpikeRecord, SpikeTrain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    pub n_per_class: usize,
    pub n_neurons: usize,
    pub duration_ms: f64,
    /// Expected spikes per neuron over the whole interval.
    #[serde(default = "default_mean_count")]
    pub mean_count: f64,
    /// Share of the spikes falling in the class's preferred half.
    #[serde(default = "default_preferred_fraction")]
    pub preferred_fraction: f64,
}

fn default_mean_count() -> f64 {
    10.0
}

fn default_preferred_fraction() -> f64 {
    0.8
}

impl SyntheticParams {
    pub fn new(n_per_class: usize, n_neurons: usize, duration_ms: f64) -> Self {
        Self {
            n_per_class,
            n_neurons,
            duration_ms,
            mean_count: default_mean_count(),
            preferred_fraction: default_preferred_fraction(),
        }
    }

    /// `2 * n_per_class` records, labels alternating 0, 1, 0, ...
    pub fn generate(&self, seed: u64) -> Result<Vec<SpikeRecord>> {
        if !(self.duration_ms.is_finite() && self.duration_ms >= 100.0) {
            return Err(Error::InvalidParameter(format!(
                "synthetic duration must be at least 100 ms, got {}",
                self.duration_ms
            )));
        }
        if !(self.mean_count > 0.0 && (0.0..=1.0).contains(&self.preferred_fraction)) {
            return Err(Error::InvalidParameter(format!(
                "invalid synthetic rates: {self:?}"
            )));
        }
        let half = self.duration_ms / 2.0;
        let hi = self.mean_count * self.preferred_fraction / half;
        let lo = self.mean_count * (1.0 - self.preferred_fraction) / half;
        let records = (0..2 * self.n_per_class)
            .map(|i| {
                let label = i % 2;
                let (first, second) = if label == 0 { (hi, lo) } else { (lo, hi) };
                let mut r = rng(derive_seed(&[seed, i as u64]));
                let trains = (0..self.n_neurons)
                    .map(|j| {
                        let mut t = poisson_times(&mut r, first, 0.0, half);
                        t.extend(poisson_times(&mut r, second, half, self.duration_ms));
                        SpikeTrain::new(j, t)
                    })
                    .collect();
                SpikeRecord {
                    example_id: format!("syn-{i}"),
                    trial_index: 0,
                    duration_ms: self.duration_ms,
                    label: Some(label),
                    trains,
                }
            })
            .collect();
        Ok(records)
    }
}

/// [`SyntheticParams::generate`] with the default rates.
pub fn synthetic_temporal(
    n_per_class: usize,
    n_neurons: usize,
    duration_ms: f64,
    seed: u64,
) -> Result<Vec<SpikeRecord>> {
    SyntheticParams::new(n_per_class, n_neurons, duration_ms).generate(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike::validate_record;

    #[test]
    fn records_are_valid_and_labelled() {
        let recs = synthetic_temporal(5, 4, 200.0, 1).unwrap();
        assert_eq!(recs.len(), 10);
        for (i, r) in recs.iter().enumerate() {
            assert!(validate_record(r).is_empty());
            assert_eq!(r.label, Some(i % 2));
            assert_eq!(r.n_neurons(), 4);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            synthetic_temporal(3, 3, 100.0, 9).unwrap(),
            synthetic_temporal(3, 3, 100.0, 9).unwrap()
        );
    }

    #[test]
    fn short_duration_rejected() {
        assert!(synthetic_temporal(1, 1, 99.0, 0).is_err());
    }
}
