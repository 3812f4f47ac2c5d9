//! Ambiguity decompositions: ensemble error = weighted average member error
//! minus ambiguity, for squared error, categorical KL and Poisson KL.
//!
//! Every report carries the residual of the identity so callers can check
//! it numerically. All divergences are in nats.

use serde::{Deserialize, Serialize};

use crate::combine::{gm_poisson, ngm_log, MemberWeights, PROBABILITY_FLOOR};
use crate::decode::TargetRates;
use crate::error::{Error, Result};
use crate::spike::{ClassProbabilities, PoissonMeans, LAMBDA_FLOOR};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdReport {
    pub ensemble_error: f64,
    pub avg_member_error: f64,
    pub ambiguity: f64,
    /// `|ensemble_error - (avg_member_error - ambiguity)|`
    pub residual: f64,
}

impl AdReport {
    fn new(ensemble_error: f64, avg_member_error: f64, ambiguity: f64) -> Self {
        Self {
            ensemble_error,
            avg_member_error,
            ambiguity,
            residual: (ensemble_error - (avg_member_error - ambiguity)).abs(),
        }
    }

    /// Example-wise mean of several reports; the identity survives averaging.
    pub fn mean(reports: &[AdReport]) -> Option<AdReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let sum = |f: fn(&AdReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(Self::new(
            sum(|r| r.ensemble_error),
            sum(|r| r.avg_member_error),
            sum(|r| r.ambiguity),
        ))
    }
}

fn check_weights(n: usize, weights: &MemberWeights) -> Result<()> {
    if n == 0 || n != weights.len() {
        return Err(Error::Shape(format!(
            "{n} members but {} weights",
            weights.len()
        )));
    }
    Ok(())
}

/// Squared-error decomposition around the weighted mean prediction.
pub fn ad_regression(y: f64, preds: &[f64], weights: &MemberWeights) -> Result<AdReport> {
    check_weights(preds.len(), weights)?;
    let w = weights.as_slice();
    let f_bar: f64 = preds.iter().zip(w).map(|(f, w)| w * f).sum();
    let avg: f64 = preds.iter().zip(w).map(|(f, w)| w * (f - y).powi(2)).sum();
    let amb: f64 = preds.iter().zip(w).map(|(f, w)| w * (f - f_bar).powi(2)).sum();
    Ok(AdReport::new((f_bar - y).powi(2), avg, amb))
}

/// `Σ p_c ln(p_c / q_c)` with `q` floored and `0 ln 0 = 0`.
pub fn kl_categorical(p: &ClassProbabilities, q: &ClassProbabilities) -> f64 {
    p.as_slice()
        .iter()
        .zip(q.as_slice())
        .filter(|(&pc, _)| pc > 0.0)
        .map(|(&pc, &qc)| pc * (pc.ln() - qc.max(PROBABILITY_FLOOR).ln()))
        .sum()
}

/// Categorical decomposition with the ensemble formed by the normalized
/// geometric mean of the members.
pub fn ad_categorical(
    target: &ClassProbabilities,
    members: &[ClassProbabilities],
    weights: &MemberWeights,
) -> Result<AdReport> {
    let log_bar = ngm_log(members, weights)?;
    if target.len() != log_bar.len() {
        return Err(Error::Shape(format!(
            "target has {} classes, members {}",
            target.len(),
            log_bar.len()
        )));
    }
    let p = target.as_slice();
    let ensemble: f64 = p
        .iter()
        .zip(&log_bar)
        .filter(|(&pc, _)| pc > 0.0)
        .map(|(&pc, &lq)| pc * (pc.ln() - lq))
        .sum();
    let q_bar: Vec<f64> = log_bar.iter().map(|l| l.exp()).collect();
    let mut avg = 0.0;
    let mut amb = 0.0;
    for (m, &w) in members.iter().zip(weights.as_slice()) {
        avg += w * kl_categorical(target, m);
        let to_member: f64 = q_bar
            .iter()
            .zip(&log_bar)
            .zip(m.as_slice())
            .filter(|((&qc, _), _)| qc > 0.0)
            .map(|((&qc, &lq), &mc)| qc * (lq - mc.max(PROBABILITY_FLOOR).ln()))
            .sum();
        amb += w * to_member;
    }
    Ok(AdReport::new(ensemble, avg, amb))
}

/// `λ ln(λ/λ̂) + λ̂ − λ`; the `λ = 0` case is `λ̂`.
pub fn kl_poisson(lambda: f64, lambda_hat: f64) -> Result<f64> {
    if !(lambda_hat.is_finite() && lambda_hat >= LAMBDA_FLOOR) {
        return Err(Error::Domain(format!(
            "estimate {lambda_hat} is below the floor {LAMBDA_FLOOR}"
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain(format!("target mean {lambda} is invalid")));
    }
    if lambda == 0.0 {
        return Ok(lambda_hat);
    }
    Ok(lambda * (lambda / lambda_hat).ln() + lambda_hat - lambda)
}

fn kl_poisson_sum(target: &ndarray::Array2<f64>, est: &PoissonMeans) -> Result<f64> {
    target
        .iter()
        .zip(est.lambda().iter())
        .map(|(&l, &lh)| kl_poisson(l, lh))
        .sum()
}

/// Poisson decomposition with the ensemble formed by the weighted geometric
/// mean of the members, summed over classes and windows.
pub fn ad_poisson(
    target: &TargetRates,
    members: &[PoissonMeans],
    weights: &MemberWeights,
) -> Result<AdReport> {
    check_weights(members.len(), weights)?;
    let bar = gm_poisson(members, weights)?;
    if target.lambda().dim() != bar.lambda().dim() {
        return Err(Error::Shape(format!(
            "target is {:?}, members {:?}",
            target.lambda().dim(),
            bar.lambda().dim()
        )));
    }
    let ensemble = kl_poisson_sum(target.lambda(), &bar)?;
    let mut avg = 0.0;
    let mut amb = 0.0;
    for (m, &w) in members.iter().zip(weights.as_slice()) {
        avg += w * kl_poisson_sum(target.lambda(), m)?;
        amb += w * kl_poisson_sum(bar.lambda(), m)?;
    }
    Ok(AdReport::new(ensemble, avg, amb))
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn p(v: &[f64]) -> ClassProbabilities {
        ClassProbabilities::new(v.to_vec()).unwrap()
    }

    #[test]
    fn regression_examples() {
        let r = ad_regression(0.0, &[1.0, -1.0], &MemberWeights::uniform(2)).unwrap();
        assert_eq!((r.ensemble_error, r.avg_member_error, r.ambiguity), (0.0, 1.0, 1.0));
        let r = ad_regression(3.0, &[2.0, 2.0], &MemberWeights::uniform(2)).unwrap();
        assert_eq!(r.ambiguity, 0.0);
        assert_eq!(r.ensemble_error, r.avg_member_error);
    }

    #[test]
    fn kl_categorical_examples() {
        let a = p(&[0.3, 0.7]);
        assert_eq!(kl_categorical(&a, &a), 0.0);
        let kl = kl_categorical(&p(&[1.0, 0.0]), &p(&[0.5, 0.5]));
        assert!((kl - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn categorical_hand_example() {
        let r = ad_categorical(
            &p(&[1.0, 0.0]),
            &[p(&[0.8, 0.2]), p(&[0.2, 0.8])],
            &MemberWeights::uniform(2),
        )
        .unwrap();
        assert!((r.ensemble_error - 2f64.ln()).abs() < 1e-12);
        assert!((r.avg_member_error - 0.9162907318741551).abs() < 1e-12);
        assert!((r.ambiguity - 0.2231435513142097).abs() < 1e-12);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn identical_members_have_no_ambiguity() {
        let m = p(&[0.1, 0.6, 0.3]);
        let r = ad_categorical(&p(&[0.0, 1.0, 0.0]), &[m.clone(), m], &MemberWeights::uniform(2))
            .unwrap();
        assert!(r.ambiguity.abs() < 1e-15);
    }

    #[test]
    fn kl_poisson_examples() {
        assert_eq!(kl_poisson(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(kl_poisson(0.0, 2.0).unwrap(), 2.0);
        assert!((kl_poisson(4.0, 2.0).unwrap() - (4.0 * 2f64.ln() - 2.0)).abs() < 1e-15);
        assert!(matches!(kl_poisson(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn poisson_hand_example() {
        let target = TargetRates::new(array![[2.0]]).unwrap();
        let a = PoissonMeans::new(array![[1.0]]).unwrap();
        let b = PoissonMeans::new(array![[4.0]]).unwrap();
        let r = ad_poisson(&target, &[a, b], &MemberWeights::uniform(2)).unwrap();
        assert!(r.ensemble_error.abs() < 1e-12);
        assert!((r.avg_member_error - 0.5).abs() < 1e-12);
        assert!((r.ambiguity - 0.5).abs() < 1e-12);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn poisson_identical_members() {
        let target = TargetRates::new(array![[0.0, 5.0]]).unwrap();
        let m = PoissonMeans::new(array![[0.5, 3.0]]).unwrap();
        let r = ad_poisson(&target, &[m.clone(), m], &MemberWeights::uniform(2)).unwrap();
        assert!(r.ambiguity.abs() < 1e-12);
    }

    #[test]
    fn mean_preserves_identity() {
        let a = AdReport::new(1.0, 3.0, 2.0);
        let b = AdReport::new(0.5, 0.75, 0.25);
        let m = AdReport::mean(&[a, b]).unwrap();
        assert!(m.residual < 1e-15);
        assert_eq!(m.ambiguity, 1.125);
    }
}
