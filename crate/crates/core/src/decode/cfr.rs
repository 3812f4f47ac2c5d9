//! Combined firing rates: per-neuron Poisson means fused within each class
//! population by geometric mean, predicted per window, then a majority vote
//! across windows.

use ndarray::Array2;

use super::estimate_rates;
use crate::error::{Error, Result};
use crate::spike::{
    argmax, majority_vote, PoissonMeans, PopulationMap, RateMatrix, SpikeRecord, WindowSpec,
    LAMBDA_FLOOR,
};

#[derive(Clone, Debug, PartialEq)]
pub struct CfrDecoded {
    /// Population geometric mean per class and window.
    pub means: PoissonMeans,
    pub window_votes: Vec<usize>,
    pub predicted: usize,
}

pub fn cfr_decode(rates: &RateMatrix, pop: &PopulationMap) -> Result<CfrDecoded> {
    if pop.n_neurons() != rates.n_neurons() {
        return Err(Error::Shape(format!(
            "population map covers {} neurons, rates have {}",
            pop.n_neurons(),
            rates.n_neurons()
        )));
    }
    let pops = pop.populations()?;
    let n_windows = rates.n_windows();
    let mut log_mean = Array2::<f64>::zeros((pop.n_classes, n_windows));
    for (c, members) in pops.iter().enumerate() {
        for &j in members {
            for w in 0..n_windows {
                log_mean[[c, w]] += rates.counts[[j, w]].max(LAMBDA_FLOOR).ln();
            }
        }
        let n = members.len() as f64;
        log_mean.row_mut(c).mapv_inplace(|x| x / n);
    }
    let means = PoissonMeans::floored(log_mean.mapv(f64::exp))?;
    let window_votes: Vec<usize> = means
        .lambda()
        .columns()
        .into_iter()
        .map(|col| argmax(&col.to_vec()))
        .collect();
    let predicted = majority_vote(&window_votes, pop.n_classes);
    Ok(CfrDecoded {
        means,
        window_votes,
        predicted,
    })
}

/// [`cfr_decode`] on the rates estimated from `records`.
pub fn cfr_decode_records(
    records: &[SpikeRecord],
    pop: &PopulationMap,
    windows: &WindowSpec,
) -> Result<CfrDecoded> {
    cfr_decode(&estimate_rates(records, windows)?, pop)
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::decode::hmfr_decode;
    use crate::decode::testutil::rates;

    #[test]
    fn single_member_matches_hmfr() {
        let r = rates(array![[3.0], [8.0], [1.0]]);
        let pop = PopulationMap::round_robin(3, 3);
        assert_eq!(
            cfr_decode(&r, &pop).unwrap().predicted,
            hmfr_decode(&r, &pop).unwrap().predicted
        );
    }

    #[test]
    fn geometric_population_mean() {
        let pop = PopulationMap::new(vec![0, 0, 1], 2).unwrap();
        let d = cfr_decode(&rates(array![[1.0], [4.0], [3.0]]), &pop).unwrap();
        assert!((d.means.lambda()[[0, 0]] - 2.0).abs() < 1e-12);
        assert!((d.means.lambda()[[1, 0]] - 3.0).abs() < 1e-12);
        assert_eq!(d.predicted, 1);
    }

    #[test]
    fn vote_across_windows() {
        let pop = PopulationMap::round_robin(2, 2);
        let d = cfr_decode(&rates(array![[5.0, 1.0, 0.0], [1.0, 2.0, 3.0]]), &pop).unwrap();
        assert_eq!(d.window_votes, vec![0, 1, 1]);
        assert_eq!(d.predicted, 1);
    }

    #[test]
    fn silent_member_is_floored() {
        let pop = PopulationMap::new(vec![0, 0], 1).unwrap();
        let d = cfr_decode(&rates(array![[0.0], [0.0]]), &pop).unwrap();
        assert!((d.means.lambda()[[0, 0]] - LAMBDA_FLOOR).abs() < 1e-18);
    }

    #[test]
    fn from_records() {
        let rec = crate::decode::testutil::record(vec![vec![1.0, 2.0], vec![3.0]], 10.0);
        let w = WindowSpec::new(10.0, 10.0).unwrap();
        let d = cfr_decode_records(&[rec], &PopulationMap::round_robin(2, 2), &w).unwrap();
        assert_eq!(d.predicted, 0);
    }
}
