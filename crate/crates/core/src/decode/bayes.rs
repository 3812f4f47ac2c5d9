//! Poisson naive-Bayes decoder over per-window spike counts.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::check_training;
use crate::error::{Error, Result};
use crate::spike::{ClassProbabilities, RateMatrix, LAMBDA_FLOOR};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prior {
    #[default]
    Uniform,
    Empirical,
}

/// Fitted class-conditional mean counts `f[j, c, w]` and class priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesModel {
    pub f: Array3<f64>,
    pub priors: ClassProbabilities,
    pub window_ms: f64,
}

impl BayesModel {
    pub fn n_neurons(&self) -> usize {
        self.f.dim().0
    }

    pub fn n_classes(&self) -> usize {
        self.f.dim().1
    }

    pub fn n_windows(&self) -> usize {
        self.f.dim().2
    }
}

/// Fits `f[j, c, w]` as the class-`c` mean of neuron `j`'s count in window
/// `w`, floored at [`LAMBDA_FLOOR`].
pub fn fit_bayes(train: &[(usize, RateMatrix)], n_classes: usize, prior: Prior) -> Result<BayesModel> {
    let (n_neurons, n_windows) = check_training(train, n_classes)?;
    let mut f = Array3::<f64>::zeros((n_neurons, n_classes, n_windows));
    let mut n = vec![0usize; n_classes];
    for (c, r) in train {
        n[*c] += 1;
        for ((j, w), &x) in r.counts.indexed_iter() {
            f[[j, *c, w]] += x;
        }
    }
    for ((_, c, _), x) in f.indexed_iter_mut() {
        *x = (*x / n[c] as f64).max(LAMBDA_FLOOR);
    }
    let priors = match prior {
        Prior::Uniform => ClassProbabilities::uniform(n_classes),
        Prior::Empirical => {
            ClassProbabilities::from_weights(&n.iter().map(|&k| k as f64).collect::<Vec<_>>())?
        }
    };
    Ok(BayesModel {
        f,
        priors,
        window_ms: train[0].1.window_ms,
    })
}

/// Integer counts fed to the pmf: single-trial counts are used as is,
/// multi-trial means are rounded to the nearest integer.
fn observed_counts(rates: &RateMatrix) -> Array2<f64> {
    if rates.trials > 1 {
        rates.counts.mapv(f64::round)
    } else {
        rates.counts.clone()
    }
}

/// Log-likelihood of each class in each window, `C × W`, without the prior.
fn window_log_likelihoods(rates: &RateMatrix, model: &BayesModel) -> Result<Array2<f64>> {
    if (rates.n_neurons(), rates.n_windows()) != (model.n_neurons(), model.n_windows()) {
        return Err(Error::Shape(format!(
            "rates are {}×{}, model expects {}×{}",
            rates.n_neurons(),
            rates.n_windows(),
            model.n_neurons(),
            model.n_windows()
        )));
    }
    let n = observed_counts(rates);
    let mut ll = Array2::<f64>::zeros((model.n_classes(), model.n_windows()));
    for ((j, w), &k) in n.indexed_iter() {
        let log_fact = ln_gamma(k + 1.0);
        for c in 0..model.n_classes() {
            let f = model.f[[j, c, w]];
            ll[[c, w]] += k * f.ln() - f - log_fact;
        }
    }
    Ok(ll)
}

fn softmax_logs(logs: &[f64]) -> Result<ClassProbabilities> {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Decode(format!("non-finite log scores: {logs:?}")));
    }
    let e: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    ClassProbabilities::from_weights(&e)
}

fn log_priors(model: &BayesModel) -> Vec<f64> {
    model.priors.as_slice().iter().map(|p| p.ln()).collect()
}

/// Posterior over classes given every window of `rates` under the
/// independence product.
pub fn bayes_decode(rates: &RateMatrix, model: &BayesModel) -> Result<(ClassProbabilities, usize)> {
    let ll = window_log_likelihoods(rates, model)?;
    let logs: Vec<f64> = ll
        .rows()
        .into_iter()
        .zip(log_priors(model))
        .map(|(row, lp)| row.sum() + lp)
        .collect();
    let post = softmax_logs(&logs)?;
    let predicted = post.argmax();
    Ok((post, predicted))
}

/// Posterior computed from each window on its own, `C × W`; column `w` sums
/// to one.
pub fn bayes_window_posteriors(rates: &RateMatrix, model: &BayesModel) -> Result<Array2<f64>> {
    let ll = window_log_likelihoods(rates, model)?;
    let lp = log_priors(model);
    let mut out = Array2::<f64>::zeros(ll.dim());
    for (w, col) in ll.columns().into_iter().enumerate() {
        let logs: Vec<f64> = col.iter().zip(&lp).map(|(l, p)| l + p).collect();
        let post = softmax_logs(&logs)?;
        for (c, &p) in post.as_slice().iter().enumerate() {
            out[[c, w]] = p;
        }
    }
    Ok(out)
}
