//! Population vector decoder: class scores are a rate-weighted average of
//! each neuron's expected count for that class.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{check_training, scored, Decoded};
use crate::error::{Error, Result};
use crate::spike::RateMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvModel {
    /// `J × C` mean total count of neuron `j` over class-`c` examples.
    pub w: Array2<f64>,
    /// Neurons whose row is all zero.
    pub inert: Vec<usize>,
}

impl PvModel {
    pub fn n_neurons(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.w.ncols()
    }
}

pub fn fit_pv(train: &[(usize, RateMatrix)], n_classes: usize) -> Result<PvModel> {
    let (n_neurons, _) = check_training(train, n_classes)?;
    let mut w = Array2::<f64>::zeros((n_neurons, n_classes));
    let mut n = vec![0usize; n_classes];
    for (c, r) in train {
        n[*c] += 1;
        for (j, total) in r.totals().into_iter().enumerate() {
            w[[j, *c]] += total;
        }
    }
    for (c, &k) in n.iter().enumerate() {
        w.column_mut(c).mapv_inplace(|x| x / k as f64);
    }
    let inert = w
        .rows()
        .into_iter()
        .enumerate()
        .filter_map(|(j, row)| row.iter().all(|&x| x == 0.0).then_some(j))
        .collect();
    Ok(PvModel { w, inert })
}

fn scores_for(r: ArrayView1<'_, f64>, model: &PvModel) -> Vec<f64> {
    let total: f64 = r.sum();
    if total <= 0.0 {
        return vec![1.0 / model.n_classes() as f64; model.n_classes()];
    }
    (0..model.n_classes())
        .map(|c| model.w.column(c).dot(&r) / total)
        .collect()
}

fn check(rates: &RateMatrix, model: &PvModel) -> Result<()> {
    if rates.n_neurons() != model.n_neurons() {
        return Err(Error::Shape(format!(
            "rates have {} neurons, model expects {}",
            rates.n_neurons(),
            model.n_neurons()
        )));
    }
    Ok(())
}

/// Scores from window-summed counts; a silent input yields uniform scores
/// and the degenerate flag.
pub fn pv_decode(rates: &RateMatrix, model: &PvModel) -> Result<Decoded> {
    check(rates, model)?;
    let totals = ndarray::Array1::from(rates.totals());
    let scores = scores_for(totals.view(), model);
    let mut d = scored(scores);
    d.degenerate = totals.sum() <= 0.0;
    Ok(d)
}

/// Scores computed from each window on its own, `C × W`.
pub fn pv_window_scores(rates: &RateMatrix, model: &PvModel) -> Result<Array2<f64>> {
    check(rates, model)?;
    let mut out = Array2::<f64>::zeros((model.n_classes(), rates.n_windows()));
    for (w, col) in rates.counts.columns().into_iter().enumerate() {
        for (c, s) in scores_for(col, model).into_iter().enumerate() {
            out[[c, w]] = s;
        }
    }
    Ok(out)
}
