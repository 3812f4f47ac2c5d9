//! Domain types shared by the simulator, the decoders and the combiners.
//!
//! Spike times are milliseconds stored as `f64`. Every type here is plain
//! immutable data once constructed and is `Send + Sync`.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to estimated Poisson means (spikes per window).
pub const LAMBDA_FLOOR: f64 = 1e-6;

/// Tolerance used when checking that a probability vector sums to one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub neuron_id: usize,
    pub times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(neuron_id: usize, times: Vec<f64>) -> Self {
        Self { neuron_id, times }
    }

    pub fn empty(neuron_id: usize) -> Self {
        Self::new(neuron_id, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Output of one simulation (or one externally recorded trial) of one example.
///
/// `trains[j]` is the train of neuron `j`; silent neurons carry an empty train.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeRecord {
    pub example_id: String,
    pub trial_index: u32,
    pub duration_ms: f64,
    pub label: Option<usize>,
    pub trains: Vec<SpikeTrain>,
}

impl SpikeRecord {
    pub fn n_neurons(&self) -> usize {
        self.trains.len()
    }

    pub fn total_spikes(&self) -> usize {
        self.trains.iter().map(SpikeTrain::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BadDuration(f64),
    IndexMismatch { position: usize, neuron_id: usize },
    NonFinite { neuron: usize, index: usize },
    NotAscending { neuron: usize, index: usize },
    OutOfRange { neuron: usize, time: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadDuration(d) => write!(f, "duration {d} is not a positive finite number"),
            Violation::IndexMismatch {
                position,
                neuron_id,
            } => write!(f, "train at position {position} carries neuron id {neuron_id}"),
            Violation::NonFinite { neuron, index } => {
                write!(f, "neuron {neuron}: spike {index} is not finite")
            }
            Violation::NotAscending { neuron, index } => {
                write!(f, "neuron {neuron}: spike {index} not ascending")
            }
            Violation::OutOfRange { neuron, time } => {
                write!(f, "neuron {neuron}: spike time {time} out of range")
            }
        }
    }
}

/// Returns every invariant violation in `record`; an empty list means the
/// record is well formed.
pub fn validate_record(record: &SpikeRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let duration = record.duration_ms;
    if !(duration.is_finite() && duration > 0.0) {
        out.push(Violation::BadDuration(duration));
    }
    for (position, train) in record.trains.iter().enumerate() {
        if train.neuron_id != position {
            out.push(Violation::IndexMismatch {
                position,
                neuron_id: train.neuron_id,
            });
        }
        let neuron = train.neuron_id;
        for (index, &t) in train.times.iter().enumerate() {
            if !t.is_finite() {
                out.push(Violation::NonFinite { neuron, index });
                continue;
            }
            if t < 0.0 || t > duration {
                out.push(Violation::OutOfRange { neuron, time: t });
            }
            if index > 0 && t <= train.times[index - 1] {
                out.push(Violation::NotAscending { neuron, index });
            }
        }
    }
    out
}

/// Fails with the first violation found, for call sites that need a gate
/// rather than a diagnostic.
pub fn ensure_valid(record: &SpikeRecord) -> Result<()> {
    match validate_record(record).first() {
        None => Ok(()),
        Some(v) => Err(Error::InvalidRecord(format!(
            "example {} trial {}: {v}",
            record.example_id, record.trial_index
        ))),
    }
}

/// Contiguous, non-overlapping, left-closed right-open windows starting at 0.
///
/// Spikes in a trailing remainder shorter than one window are discarded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_ms: f64,
    pub n_windows: usize,
}

impl WindowSpec {
    pub fn new(window_ms: f64, duration_ms: f64) -> Result<Self> {
        if !(window_ms.is_finite() && window_ms > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "window length must be positive, got {window_ms}"
            )));
        }
        if !(duration_ms.is_finite() && duration_ms > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "duration must be positive, got {duration_ms}"
            )));
        }
        // The epsilon absorbs representation error in ratios like 0.35 / 0.01.
        let n_windows = (duration_ms / window_ms + 1e-9).floor() as usize;
        if n_windows == 0 {
            return Err(Error::InvalidParameter(format!(
                "window of {window_ms} ms does not fit in {duration_ms} ms"
            )));
        }
        Ok(Self {
            window_ms,
            n_windows,
        })
    }

    /// Window containing `t`, or `None` for the discarded remainder.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        if t < 0.0 {
            return None;
        }
        let w = (t / self.window_ms).floor() as usize;
        (w < self.n_windows).then_some(w)
    }

    pub fn covered_ms(&self) -> f64 {
        self.window_ms * self.n_windows as f64
    }
}

/// Trial-averaged spike counts, neurons × windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    pub counts: Array2<f64>,
    pub window_ms: f64,
    /// Number of trials the counts were averaged over.
    pub trials: usize,
}

impl RateMatrix {
    pub fn n_neurons(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_windows(&self) -> usize {
        self.counts.ncols()
    }

    /// Window-summed count per neuron.
    pub fn totals(&self) -> Vec<f64> {
        self.counts.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Counts converted to Hz.
    pub fn to_hz(&self) -> Array2<f64> {
        &self.counts / (self.window_ms / 1000.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities(Vec<f64>);

impl ClassProbabilities {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidParameter("empty probability vector".into()));
        }
        if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "probabilities must be finite and non-negative: {p:?}"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self(p))
    }

    /// Normalizes non-negative weights; an all-zero vector becomes uniform.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weights must be finite and non-negative: {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if sum > 0.0 {
            Self::new(w.iter().map(|x| x / sum).collect())
        } else {
            Ok(Self::uniform(w.len()))
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(class: usize, n: usize) -> Self {
        let mut p = vec![0.0; n];
        p[class] = 1.0;
        Self(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Poisson means, classes × windows, every entry at least [`LAMBDA_FLOOR`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonMeans {
    lambda: Array2<f64>,
}

impl PoissonMeans {
    pub fn new(lambda: Array2<f64>) -> Result<Self> {
        if let Some(bad) = lambda
            .iter()
            .find(|&&x| !(x.is_finite() && x >= LAMBDA_FLOOR))
        {
            return Err(Error::Domain(format!(
                "Poisson mean {bad} is below the floor {LAMBDA_FLOOR}"
            )));
        }
        Ok(Self { lambda })
    }

    /// Clamps every entry up to [`LAMBDA_FLOOR`].
    pub fn floored(mut lambda: Array2<f64>) -> Result<Self> {
        lambda.mapv_inplace(|x| x.max(LAMBDA_FLOOR));
        Self::new(lambda)
    }

    pub fn lambda(&self) -> &Array2<f64> {
        &self.lambda
    }

    pub fn n_classes(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn n_windows(&self) -> usize {
        self.lambda.ncols()
    }
}

/// Output-neuron to class assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationMap {
    pub assignment: Vec<usize>,
    pub n_classes: usize,
}

impl PopulationMap {
    pub fn new(assignment: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some(&c) = assignment.iter().find(|&&c| c >= n_classes) {
            return Err(Error::InvalidParameter(format!(
                "class {c} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            assignment,
            n_classes,
        })
    }

    /// Neuron `j` goes to class `j % n_classes`.
    pub fn round_robin(n_neurons: usize, n_classes: usize) -> Self {
        Self {
            assignment: (0..n_neurons).map(|j| j % n_classes).collect(),
            n_classes,
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.assignment.len()
    }

    pub fn members(&self, class: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(j, &c)| (c == class).then_some(j))
            .collect()
    }

    /// Member lists for every class; fails if any class has no members.
    pub fn populations(&self) -> Result<Vec<Vec<usize>>> {
        let pops: Vec<Vec<usize>> = (0..self.n_classes).map(|c| self.members(c)).collect();
        if let Some(c) = pops.iter().position(Vec::is_empty) {
            return Err(Error::Decode(format!("class {c} has no member neurons")));
        }
        Ok(pops)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Most frequent class among `votes`; ties go to the lowest class index.
pub fn majority_vote(votes: &[usize], n_classes: usize) -> usize {
    let mut tally = vec![0usize; n_classes];
    for &v in votes {
        tally[v] += 1;
    }
    let mut best = 0;
    for (c, &n) in tally.iter().enumerate().skip(1) {
        if n > tally[best] {
            best = c;
        }
    }
    best
}
