//! Spike-train interpretation: rate estimation, highest mean firing rate and
//! its normalized variants, target encoding, plus the Bayes, population
//! vector and combined-firing-rate decoders in submodules.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spike::{argmax, ClassProbabilities, PopulationMap, RateMatrix, SpikeRecord, WindowSpec};

pub mod bayes;
pub mod cfr;
pub mod pv;

pub use bayes::{bayes_decode, bayes_window_posteriors, fit_bayes, BayesModel, Prior};
pub use cfr::{cfr_decode, cfr_decode_records, CfrDecoded};
pub use pv::{fit_pv, pv_decode, pv_window_scores, PvModel};

/// Class scores with the predicted class. `degenerate` marks outputs where
/// the prediction came from the tie rule alone (no activity at all).
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub scores: Vec<f64>,
    pub predicted: usize,
    pub degenerate: bool,
}

/// Mean spike count per neuron and window over `records`, which must be
/// trials of one example.
pub fn estimate_rates(records: &[SpikeRecord], windows: &WindowSpec) -> Result<RateMatrix> {
    let first = records
        .first()
        .ok_or_else(|| Error::Shape("no trials to estimate rates from".into()))?;
    let n = first.n_neurons();
    for r in records {
        if r.n_neurons() != n || r.duration_ms != first.duration_ms {
            return Err(Error::Shape(format!(
                "trial {} of {} has {} neurons over {} ms, expected {n} over {} ms",
                r.trial_index,
                r.example_id,
                r.n_neurons(),
                r.duration_ms,
                first.duration_ms
            )));
        }
    }
    if windows.covered_ms() > first.duration_ms + 1e-9 {
        return Err(Error::Shape(format!(
            "windows cover {} ms but records last {} ms",
            windows.covered_ms(),
            first.duration_ms
        )));
    }
    let mut counts = Array2::<f64>::zeros((n, windows.n_windows));
    for r in records {
        for (j, train) in r.trains.iter().enumerate() {
            for &t in &train.times {
                if let Some(w) = windows.index_of(t) {
                    counts[[j, w]] += 1.0;
                }
            }
        }
    }
    let k = records.len() as f64;
    counts.mapv_inplace(|c| c / k);
    Ok(RateMatrix {
        counts,
        window_ms: windows.window_ms,
        trials: records.len(),
    })
}

/// Population-mean count per class and window, `C × W`.
pub fn hmfr_window_scores(rates: &RateMatrix, pop: &PopulationMap) -> Result<Array2<f64>> {
    check_population(rates, pop)?;
    let pops = pop.populations()?;
    let mut out = Array2::<f64>::zeros((pop.n_classes, rates.n_windows()));
    for (c, members) in pops.iter().enumerate() {
        for &j in members {
            out.row_mut(c).zip_mut_with(&rates.counts.row(j), |o, &x| *o += x);
        }
        let n = members.len() as f64;
        out.row_mut(c).mapv_inplace(|x| x / n);
    }
    Ok(out)
}

/// Highest mean firing rate: each class scores the mean window-summed count
/// of its member neurons.
pub fn hmfr_decode(rates: &RateMatrix, pop: &PopulationMap) -> Result<Decoded> {
    let per_window = hmfr_window_scores(rates, pop)?;
    let scores: Vec<f64> = per_window.rows().into_iter().map(|r| r.sum()).collect();
    Ok(scored(scores))
}

pub(crate) fn scored(scores: Vec<f64>) -> Decoded {
    let degenerate = scores.iter().all(|&s| s == 0.0);
    Decoded {
        predicted: argmax(&scores),
        scores,
        degenerate,
    }
}

fn check_population(rates: &RateMatrix, pop: &PopulationMap) -> Result<()> {
    if pop.n_neurons() != rates.n_neurons() {
        return Err(Error::Shape(format!(
            "population map covers {} neurons, rates have {}",
            pop.n_neurons(),
            rates.n_neurons()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Softmax,
    Activity,
    Max,
}

/// Turns non-negative class scores into probabilities.
pub fn normalize(scores: &[f64], method: Normalization) -> Result<ClassProbabilities> {
    if scores.is_empty() {
        return Err(Error::InvalidParameter("no class scores".into()));
    }
    if scores.iter().any(|&s| !(s.is_finite() && s >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "scores must be finite and non-negative: {scores:?}"
        )));
    }
    match method {
        Normalization::Softmax => {
            let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
            ClassProbabilities::from_weights(&e)
        }
        Normalization::Activity => ClassProbabilities::from_weights(scores),
        Normalization::Max => ClassProbabilities::from_weights(&max_ratios(scores)),
    }
}

/// `r_c / max_c r_c` before renormalization; all zeros stay zeros.
pub fn max_ratios(scores: &[f64]) -> Vec<f64> {
    let top = scores.iter().copied().fold(0.0, f64::max);
    if top > 0.0 {
        scores.iter().map(|s| s / top).collect()
    } else {
        vec![0.0; scores.len()]
    }
}

/// Normalized HMFR: the HMFR scores passed through [`normalize`].
pub fn norm_hmfr_decode(
    rates: &RateMatrix,
    pop: &PopulationMap,
    method: Normalization,
) -> Result<(ClassProbabilities, usize)> {
    let d = hmfr_decode(rates, pop)?;
    let p = normalize(&d.scores, method)?;
    let predicted = p.argmax();
    Ok((p, predicted))
}

/// Target Poisson means for one label, `C × W`: the label row holds `r_max`,
/// every other row zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetRates {
    lambda: Array2<f64>,
}

impl TargetRates {
    /// Any matrix of finite non-negative means.
    pub fn new(lambda: Array2<f64>) -> Result<Self> {
        if lambda.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::Domain("target means must be finite and non-negative".into()));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> &Array2<f64> {
        &self.lambda
    }

    /// Copy with every entry raised to at least `floor`.
    pub fn floored(&self, floor: f64) -> Self {
        Self {
            lambda: self.lambda.mapv(|x| x.max(floor)),
        }
    }
}

pub fn encode_targets(
    label: usize,
    n_classes: usize,
    r_max: f64,
    windows: &WindowSpec,
) -> Result<TargetRates> {
    if label >= n_classes {
        return Err(Error::InvalidParameter(format!(
            "label {label} out of range for {n_classes} classes"
        )));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(Error::InvalidParameter(format!("r_max must be positive, got {r_max}")));
    }
    let mut lambda = Array2::<f64>::zeros((n_classes, windows.n_windows));
    lambda.row_mut(label).fill(r_max);
    Ok(TargetRates { lambda })
}

/// Shared shape check for fitted models: every training matrix must match
/// the first.
pub(crate) fn check_training(train: &[(usize, RateMatrix)], n_classes: usize) -> Result<(usize, usize)> {
    let first = &train
        .first()
        .ok_or_else(|| Error::Fit("no training examples".into()))?
        .1;
    let shape = (first.n_neurons(), first.n_windows());
    let mut seen = vec![false; n_classes];
    for (label, r) in train {
        if *label >= n_classes {
            return Err(Error::Fit(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        if (r.n_neurons(), r.n_windows()) != shape {
            return Err(Error::Shape(format!(
                "training rates are {}×{}, expected {}×{}",
                r.n_neurons(),
                r.n_windows(),
                shape.0,
                shape.1
            )));
        }
        seen[*label] = true;
    }
    if let Some(c) = seen.iter().position(|&s| !s) {
        return Err(Error::Fit(format!("class {c} has no training examples")));
    }
    Ok(shape)
}
