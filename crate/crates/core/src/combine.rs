//! Ensemble combiners: normalized geometric mean over class probabilities,
//! weighted geometric mean over Poisson means, and the arithmetic-mean and
//! voting baselines over per-window member scores.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::decode::{scored, Decoded};
use crate::error::{Error, Result};
use crate::spike::{argmax, majority_vote, ClassProbabilities, PoissonMeans};

/// Floor applied to member probabilities inside [`ngm`].
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Non-negative member weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberWeights(Vec<f64>);

impl MemberWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("no member weights".into()));
        }
        if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "member weights must be finite and non-negative: {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "member weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
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
}

fn check_members(n_members: usize, weights: &MemberWeights) -> Result<()> {
    if n_members == 0 {
        return Err(Error::Combination("no ensemble members".into()));
    }
    if n_members != weights.len() {
        return Err(Error::Shape(format!(
            "{n_members} members but {} weights",
            weights.len()
        )));
    }
    Ok(())
}

/// `ln q̄_c` of the normalized geometric mean, computed in log space.
pub(crate) fn ngm_log(members: &[ClassProbabilities], weights: &MemberWeights) -> Result<Vec<f64>> {
    check_members(members.len(), weights)?;
    let c = members[0].len();
    if members.iter().any(|m| m.len() != c) {
        return Err(Error::Shape("members disagree on the number of classes".into()));
    }
    let mut log_q = vec![0.0; c];
    for (m, &w) in members.iter().zip(weights.as_slice()) {
        if w == 0.0 {
            continue;
        }
        for (acc, &p) in log_q.iter_mut().zip(m.as_slice()) {
            *acc += w * p.max(PROBABILITY_FLOOR).ln();
        }
    }
    let top = log_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Combination("every class was zeroed".into()));
    }
    let log_z = top + log_q.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    Ok(log_q.into_iter().map(|l| l - log_z).collect())
}

/// Normalized geometric mean `q̄_c ∝ Π_m q_{mc}^{w_m}`.
pub fn ngm(members: &[ClassProbabilities], weights: &MemberWeights) -> Result<ClassProbabilities> {
    let log_q = ngm_log(members, weights)?;
    ClassProbabilities::from_weights(&log_q.iter().map(|l| l.exp()).collect::<Vec<_>>())
}

/// Entrywise weighted geometric mean of Poisson means; no normalization.
pub fn gm_poisson(members: &[PoissonMeans], weights: &MemberWeights) -> Result<PoissonMeans> {
    check_members(members.len(), weights)?;
    let dim = members[0].lambda().dim();
    if members.iter().any(|m| m.lambda().dim() != dim) {
        return Err(Error::Shape("members disagree on the shape of their means".into()));
    }
    let mut log_mean = Array2::<f64>::zeros(dim);
    for (m, &w) in members.iter().zip(weights.as_slice()) {
        log_mean.zip_mut_with(m.lambda(), |acc, &x| *acc += w * x.ln());
    }
    PoissonMeans::floored(log_mean.mapv(f64::exp))
}

fn check_rates(rates: &[Array2<f64>]) -> Result<(usize, usize)> {
    let first = rates
        .first()
        .ok_or_else(|| Error::Combination("no ensemble members".into()))?;
    let dim = first.dim();
    if rates.iter().any(|r| r.dim() != dim) {
        return Err(Error::Shape("member score matrices differ in shape".into()));
    }
    if dim.0 == 0 || dim.1 == 0 {
        return Err(Error::Shape("member score matrices are empty".into()));
    }
    Ok(dim)
}

/// Arithmetic mean of member scores over members and windows. Each member
/// contributes a `C × W` matrix.
pub fn am_combine(member_rates: &[Array2<f64>]) -> Result<Decoded> {
    let (c, w) = check_rates(member_rates)?;
    let mut sum = Array2::<f64>::zeros((c, w));
    for r in member_rates {
        sum += r;
    }
    let scale = (w * member_rates.len()) as f64;
    let scores = sum.rows().into_iter().map(|row| row.sum() / scale).collect();
    Ok(scored(scores))
}

/// `member_votes[m][w]` is member `m`'s vote in window `w`. Members vote
/// within each window, then the windows vote.
pub fn mv_combine(member_votes: &[Vec<usize>], n_classes: usize) -> Result<usize> {
    if member_votes.is_empty() || member_votes.iter().any(Vec::is_empty) {
        return Err(Error::Combination("every member needs at least one vote".into()));
    }
    if let Some(&bad) = member_votes.iter().flatten().find(|&&v| v >= n_classes) {
        return Err(Error::InvalidParameter(format!(
            "vote {bad} out of range for {n_classes} classes"
        )));
    }
    let n_windows = member_votes[0].len();
    if member_votes.iter().any(|v| v.len() != n_windows) {
        return Err(Error::Shape("members disagree on the number of windows".into()));
    }
    let per_window: Vec<usize> = (0..n_windows)
        .map(|w| {
            let column: Vec<usize> = member_votes.iter().map(|v| v[w]).collect();
            majority_vote(&column, n_classes)
        })
        .collect();
    Ok(majority_vote(&per_window, n_classes))
}

/// Per window, average members and take the argmax; then vote across
/// windows.
pub fn am_mv_combine(member_rates: &[Array2<f64>]) -> Result<usize> {
    let (c, w) = check_rates(member_rates)?;
    let mut sum = Array2::<f64>::zeros((c, w));
    for r in member_rates {
        sum += r;
    }
    let votes: Vec<usize> = sum
        .columns()
        .into_iter()
        .map(|col| argmax(&col.to_vec()))
        .collect();
    Ok(majority_vote(&votes, c))
}

/// Per-window argmax of a member's `C × W` scores.
pub fn window_votes(scores: &Array2<f64>) -> Vec<usize> {
    scores
        .columns()
        .into_iter()
        .map(|col| argmax(&col.to_vec()))
        .collect()
}
