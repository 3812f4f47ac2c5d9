//! Decoder × combiner evaluation over recorded spike trains.

use std::collections::HashMap;

use anyhow::{anyhow, bail, ensure, Context, Result};
use ndarray::Array2;
use rayon::prelude::*;
use spike_ensemble::ambiguity::{ad_categorical, ad_poisson, AdReport};
use spike_ensemble::combine::{am_combine, am_mv_combine, gm_poisson, mv_combine, ngm, window_votes, MemberWeights};
use spike_ensemble::decode::{
    bayes_decode, bayes_window_posteriors, cfr_decode, encode_targets, estimate_rates, fit_bayes,
    fit_pv, hmfr_decode, hmfr_window_scores, normalize, pv_decode, pv_window_scores,
};
use spike_ensemble::io::config::{CombinerKind, DecoderConfig, DecoderKind, EvaluationConfig};
use spike_ensemble::spike::{majority_vote, ClassProbabilities, PoissonMeans, RateMatrix, SpikeRecord, WindowSpec, LAMBDA_FLOOR};

use crate::pipeline::MemberData;

/// All trials of one example, reduced to a rate matrix.
#[derive(Clone, Debug)]
pub struct ExampleRates {
    pub id: String,
    pub label: usize,
    pub rates: RateMatrix,
}

/// Groups records by example id (first-seen order) and estimates rates.
pub fn group_rates(records: &[SpikeRecord], window_ms: f64) -> Result<Vec<ExampleRates>> {
    let first = records.first().context("no records")?;
    let windows = WindowSpec::new(window_ms, first.duration_ms)?;
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<SpikeRecord>> = Vec::new();
    for r in records {
        let slot = *index.entry(r.example_id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(r.clone());
    }
    groups
        .into_iter()
        .map(|trials| {
            let id = trials[0].example_id.clone();
            let label = trials[0]
                .label
                .with_context(|| format!("record {id} has no label"))?;
            if trials.iter().any(|t| t.label != Some(label)) {
                bail!("trials of {id} disagree on the label");
            }
            Ok(ExampleRates {
                id,
                label,
                rates: estimate_rates(&trials, &windows)?,
            })
        })
        .collect()
}

/// What one member's decoder says about one test example.
#[derive(Clone, Debug)]
pub struct MemberOutput {
    pub predicted: usize,
    pub probs: Option<ClassProbabilities>,
    pub means: Option<PoissonMeans>,
    /// Per-window class scores, `C × W`, used by the mean and vote combiners.
    pub windows: Array2<f64>,
}

#[derive(Clone, Debug)]
pub struct DecodedMember {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub outputs: Vec<MemberOutput>,
}

impl DecodedMember {
    pub fn accuracy(&self) -> f64 {
        accuracy(self.outputs.iter().map(|o| o.predicted), &self.labels)
    }
}

fn accuracy(predicted: impl Iterator<Item = usize>, labels: &[usize]) -> f64 {
    let hits = predicted.zip(labels).filter(|(p, l)| p == *l).count();
    hits as f64 / labels.len().max(1) as f64
}

pub fn decode_member(
    member: &MemberData,
    decoder: &DecoderConfig,
    n_classes: usize,
    eval: &EvaluationConfig,
) -> Result<DecodedMember> {
    let test = group_rates(&member.test, decoder.window_ms)?;
    let pop = &member.population;
    let outputs: Vec<MemberOutput> = match decoder.name {
        DecoderKind::Hmfr | DecoderKind::NormHmfr => test
            .iter()
            .map(|ex| {
                let d = hmfr_decode(&ex.rates, pop)?;
                let w = hmfr_window_scores(&ex.rates, pop)?;
                if decoder.name == DecoderKind::Hmfr {
                    Ok(MemberOutput {
                        predicted: d.predicted,
                        probs: None,
                        means: Some(PoissonMeans::floored(w.clone())?),
                        windows: w,
                    })
                } else {
                    let p = normalize(&d.scores, eval.normalization)?;
                    let mut nw = Array2::zeros(w.dim());
                    for (k, col) in w.columns().into_iter().enumerate() {
                        let pk = normalize(&col.to_vec(), eval.normalization)?;
                        nw.column_mut(k).assign(&ndarray::ArrayView1::from(pk.as_slice()));
                    }
                    Ok(MemberOutput {
                        predicted: p.argmax(),
                        probs: Some(p),
                        means: None,
                        windows: nw,
                    })
                }
            })
            .collect::<Result<_>>()?,
        DecoderKind::Bayes => {
            let train = training_pairs(&member.train, decoder.window_ms)?;
            let model = fit_bayes(&train, n_classes, eval.prior)?;
            test.iter()
                .map(|ex| {
                    let (p, predicted) = bayes_decode(&ex.rates, &model)?;
                    Ok(MemberOutput {
                        predicted,
                        probs: Some(p),
                        means: None,
                        windows: bayes_window_posteriors(&ex.rates, &model)?,
                    })
                })
                .collect::<Result<_>>()?
        }
        DecoderKind::Pv => {
            let train = training_pairs(&member.train, decoder.window_ms)?;
            let model = fit_pv(&train, n_classes)?;
            test.iter()
                .map(|ex| {
                    Ok(MemberOutput {
                        predicted: pv_decode(&ex.rates, &model)?.predicted,
                        probs: None,
                        means: None,
                        windows: pv_window_scores(&ex.rates, &model)?,
                    })
                })
                .collect::<Result<_>>()?
        }
        DecoderKind::Cfr => test
            .iter()
            .map(|ex| {
                let d = cfr_decode(&ex.rates, pop)?;
                Ok(MemberOutput {
                    predicted: d.predicted,
                    windows: d.means.lambda().clone(),
                    means: Some(d.means),
                    probs: None,
                })
            })
            .collect::<Result<_>>()?,
    };
    Ok(DecodedMember {
        ids: test.iter().map(|e| e.id.clone()).collect(),
        labels: test.iter().map(|e| e.label).collect(),
        outputs,
    })
}

fn training_pairs(records: &[SpikeRecord], window_ms: f64) -> Result<Vec<(usize, RateMatrix)>> {
    Ok(group_rates(records, window_ms)?
        .into_iter()
        .map(|e| (e.label, e.rates))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Ok,
    Skipped(String),
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Skipped(_) => "skipped",
            CellStatus::Failed(_) => "failed",
        }
    }
}

/// One decoder × combiner cell of the report.
#[derive(Clone, Debug)]
pub struct CellRow {
    pub decoder: DecoderKind,
    pub window_ms: f64,
    pub combiner: CombinerKind,
    pub status: CellStatus,
    pub n_test: usize,
    pub member_accuracies: Vec<f64>,
    pub ensemble_accuracy: Option<f64>,
    /// Example-wise mean of the decomposition terms (NGM and GM cells).
    pub ad: Option<AdReport>,
    pub ad_examples: Vec<(String, AdReport)>,
    /// `confusion[true][predicted]` for the ensemble.
    pub confusion: Vec<Vec<usize>>,
}

impl CellRow {
    fn empty(decoder: &DecoderConfig, combiner: CombinerKind, status: CellStatus) -> Self {
        Self {
            decoder: decoder.name,
            window_ms: decoder.window_ms,
            combiner,
            status,
            n_test: 0,
            member_accuracies: Vec::new(),
            ensemble_accuracy: None,
            ad: None,
            ad_examples: Vec::new(),
            confusion: Vec::new(),
        }
    }

    pub fn avg_member_accuracy(&self) -> Option<f64> {
        if self.member_accuracies.is_empty() {
            return None;
        }
        Some(self.member_accuracies.iter().sum::<f64>() / self.member_accuracies.len() as f64)
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub rows: Vec<CellRow>,
    pub n_members: usize,
    pub n_classes: usize,
}

impl RunReport {
    pub fn all_completed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| !matches!(r.status, CellStatus::Failed(_)))
    }

    pub fn row(&self, decoder: DecoderKind, combiner: CombinerKind) -> Option<&CellRow> {
        self.rows
            .iter()
            .find(|r| r.decoder == decoder && r.combiner == combiner)
    }
}

fn applicable(decoder: DecoderKind, combiner: CombinerKind) -> Result<(), String> {
    match combiner {
        CombinerKind::Ngm if !matches!(decoder, DecoderKind::NormHmfr | DecoderKind::Bayes) => {
            Err(format!("{} does not produce class probabilities", decoder.name()))
        }
        CombinerKind::Gm if !matches!(decoder, DecoderKind::Hmfr | DecoderKind::Cfr) => {
            Err(format!("{} does not produce Poisson means", decoder.name()))
        }
        _ => Ok(()),
    }
}

fn combine_cell(
    decoded: &[DecodedMember],
    decoder: &DecoderConfig,
    combiner: CombinerKind,
    n_classes: usize,
    eval: &EvaluationConfig,
) -> Result<CellRow> {
    let first = &decoded[0];
    for d in decoded {
        ensure!(
            d.ids == first.ids,
            "members were recorded on different test examples"
        );
    }
    let n_members = decoded.len();
    let weights = MemberWeights::uniform(n_members);
    let mut predicted = Vec::with_capacity(first.ids.len());
    let mut ad_examples = Vec::new();
    for (i, (id, &label)) in first.ids.iter().zip(&first.labels).enumerate() {
        let outs: Vec<&MemberOutput> = decoded.iter().map(|d| &d.outputs[i]).collect();
        let windows: Vec<Array2<f64>> = outs.iter().map(|o| o.windows.clone()).collect();
        let p = match combiner {
            CombinerKind::Ngm => {
                let probs: Vec<ClassProbabilities> = outs
                    .iter()
                    .map(|o| o.probs.clone().ok_or_else(|| anyhow!("missing probabilities")))
                    .collect::<Result<_>>()?;
                let q = ngm(&probs, &weights)?;
                let target = ClassProbabilities::one_hot(label, n_classes);
                ad_examples.push((id.clone(), ad_categorical(&target, &probs, &weights)?));
                q.argmax()
            }
            CombinerKind::Gm => {
                let means: Vec<PoissonMeans> = outs
                    .iter()
                    .map(|o| o.means.clone().ok_or_else(|| anyhow!("missing Poisson means")))
                    .collect::<Result<_>>()?;
                let bar = gm_poisson(&means, &weights)?;
                let n_windows = bar.n_windows();
                let spec = WindowSpec {
                    window_ms: decoder.window_ms,
                    n_windows,
                };
                let target = encode_targets(label, n_classes, eval.r_max, &spec)?.floored(LAMBDA_FLOOR);
                ad_examples.push((id.clone(), ad_poisson(&target, &means, &weights)?));
                majority_vote(&window_votes(bar.lambda()), n_classes)
            }
            CombinerKind::Am => am_combine(&windows)?.predicted,
            CombinerKind::Mv => {
                let votes: Vec<Vec<usize>> = windows.iter().map(window_votes).collect();
                mv_combine(&votes, n_classes)?
            }
            CombinerKind::AmMv => am_mv_combine(&windows)?,
        };
        predicted.push(p);
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &l) in predicted.iter().zip(&first.labels) {
        confusion[l][p] += 1;
    }
    let reports: Vec<AdReport> = ad_examples.iter().map(|(_, r)| *r).collect();
    Ok(CellRow {
        decoder: decoder.name,
        window_ms: decoder.window_ms,
        combiner,
        status: CellStatus::Ok,
        n_test: first.ids.len(),
        member_accuracies: decoded.iter().map(DecodedMember::accuracy).collect(),
        ensemble_accuracy: Some(accuracy(predicted.into_iter(), &first.labels)),
        ad: AdReport::mean(&reports),
        ad_examples,
        confusion,
    })
}

/// Runs every configured decoder × combiner cell. Failures are recorded in
/// the affected rows and never abort the run.
pub fn evaluate(members: &[MemberData], n_classes: usize, eval: &EvaluationConfig) -> RunReport {
    let mut rows = Vec::new();
    for decoder in &eval.decoders {
        let decoded: Result<Vec<DecodedMember>> = members
            .par_iter()
            .map(|m| decode_member(m, decoder, n_classes, eval))
            .collect();
        for &combiner in &eval.combiners {
            let row = match (&decoded, applicable(decoder.name, combiner)) {
                (_, Err(why)) => CellRow::empty(decoder, combiner, CellStatus::Skipped(why)),
                (Err(e), _) => CellRow::empty(decoder, combiner, CellStatus::Failed(format!("{e:#}"))),
                (Ok(d), Ok(())) => combine_cell(d, decoder, combiner, n_classes, eval)
                    .unwrap_or_else(|e| {
                        CellRow::empty(decoder, combiner, CellStatus::Failed(format!("{e:#}")))
                    }),
            };
            if let CellStatus::Failed(why) = &row.status {
                log::error!("{} × {} failed: {why}", decoder.name.name(), combiner.name());
            }
            rows.push(row);
        }
    }
    RunReport {
        rows,
        n_members: members.len(),
        n_classes,
    }
}
