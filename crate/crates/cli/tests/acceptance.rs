//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spike_ensemble::ambiguity::{ad_categorical, ad_poisson, kl_categorical};
use spike_ensemble::combine::{ngm, MemberWeights};
use spike_ensemble::decode::{bayes_decode, hmfr_decode, norm_hmfr_decode, BayesModel, Normalization, TargetRates};
use spike_ensemble::io::config::{CombinerKind, DecoderKind};
use spike_ensemble::io::model::{from_bytes, to_bytes};
use spike_ensemble::io::records::{read_from, read_records, write_records, write_to};
use spike_ensemble::io::{load_model, read_mnist_dir, save_model, ExperimentConfig, Model, TrainedMember};
use spike_ensemble::lif::{build_diehl_cook, Integrator, LifParams, NetworkParams, NeuronState};
use spike_ensemble::stdp::{assign_classes, train_unsupervised, PresentationParams, StdpParams};
use spike_ensemble::{
    ClassProbabilities, PoissonMeans, PopulationMap, RateMatrix, SpikeRecord, SpikeTrain, LAMBDA_FLOOR,
};
use spike_ensemble_cli::{cmd_evaluate, cmd_record, cmd_synth, cmd_train, RunReport, Split};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn random_probs(rng: &mut ChaCha8Rng, c: usize) -> ClassProbabilities {
    // Log-uniform weights over many decades, with the odd exact zero.
    let w: Vec<f64> = (0..c)
        .map(|_| {
            if rng.random_bool(0.05) {
                0.0
            } else {
                10f64.powf(rng.random_range(-12.0..2.0))
            }
        })
        .collect();
    ClassProbabilities::from_weights(&w).unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> MemberWeights {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let head: f64 = w[..m - 1].iter().sum();
    w[m - 1] = 1.0 - head;
    MemberWeights::new(w).unwrap()
}

struct CategoricalFuzz {
    worst_residual: f64,
    min_ambiguity: f64,
    guarantee_violations: usize,
    seconds: f64,
}

fn categorical_fuzz() -> CategoricalFuzz {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut out = CategoricalFuzz {
        worst_residual: 0.0,
        min_ambiguity: f64::INFINITY,
        guarantee_violations: 0,
        seconds: 0.0,
    };
    for _ in 0..10_000 {
        let m = rng.random_range(1..=10);
        let c = rng.random_range(2..=20);
        let members: Vec<_> = (0..m).map(|_| random_probs(&mut rng, c)).collect();
        let weights = random_weights(&mut rng, m);
        let target = if rng.random_bool(0.5) {
            ClassProbabilities::one_hot(rng.random_range(0..c), c)
        } else {
            random_probs(&mut rng, c)
        };
        let r = ad_categorical(&target, &members, &weights).unwrap();
        out.worst_residual = out.worst_residual.max(r.residual);
        out.min_ambiguity = out.min_ambiguity.min(r.ambiguity);

        let bar = ngm(&members, &weights).unwrap();
        let ens = kl_categorical(&target, &bar);
        let avg: f64 = members
            .iter()
            .zip(weights.as_slice())
            .map(|(q, w)| w * kl_categorical(&target, q))
            .sum();
        if ens > avg + 1e-12 * (1.0 + avg) {
            out.guarantee_violations += 1;
        }
    }
    out.seconds = start.elapsed().as_secs_f64();
    out
}

fn criterion_01(f: &CategoricalFuzz) -> Outcome {
    outcome(
        f.worst_residual <= 1e-9 && f.min_ambiguity >= -1e-9 && f.seconds < 10.0,
        format!(
            "categorical AD over 10000 instances: max residual {:.2e}, min ambiguity {:.2e}, {:.2}s",
            f.worst_residual, f.min_ambiguity, f.seconds
        ),
    )
}

fn criterion_02() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut min_amb = f64::INFINITY;
    for _ in 0..10_000 {
        let m = rng.random_range(1..=10);
        let c = rng.random_range(1..=20);
        let w = rng.random_range(1..=8);
        let draw = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(LAMBDA_FLOOR.log10()..2.0));
        let members: Vec<_> = (0..m)
            .map(|_| PoissonMeans::new(Array2::from_shape_simple_fn((c, w), || draw(&mut rng))).unwrap())
            .collect();
        let target = if rng.random_bool(0.5) {
            let label = rng.random_range(0..c);
            let r_max = rng.random_range(1.0..100.0);
            Array2::from_shape_fn((c, w), |(k, _)| if k == label { r_max } else { 0.0 })
        } else {
            Array2::from_shape_simple_fn((c, w), || draw(&mut rng))
        };
        let weights = random_weights(&mut rng, m);
        let r = ad_poisson(&TargetRates::new(target).unwrap(), &members, &weights).unwrap();
        worst = worst.max(r.residual);
        min_amb = min_amb.min(r.ambiguity);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && min_amb >= -1e-9 && secs < 30.0,
        format!("Poisson AD over 10000 instances: max residual {worst:.2e}, min ambiguity {min_amb:.2e}, {secs:.2}s"),
    )
}

fn criterion_03(f: &CategoricalFuzz) -> Outcome {
    outcome(
        f.guarantee_violations == 0,
        format!(
            "NGM ensemble KL <= weighted member KL: {} violations in 10000 instances",
            f.guarantee_violations
        ),
    )
}

/// Posterior from the plain pmf product and Bayes' rule, no logs.
fn brute_force_posterior(counts: &[u32], f: &Array3<f64>, priors: &[f64]) -> Vec<f64> {
    let (j_n, c_n, w_n) = f.dim();
    let factorial = |k: u32| (1..=k).map(f64::from).product::<f64>();
    let joint: Vec<f64> = (0..c_n)
        .map(|c| {
            let mut p = priors[c];
            for j in 0..j_n {
                for w in 0..w_n {
                    let k = counts[j * w_n + w];
                    let lam = f[[j, c, w]];
                    p *= lam.powi(k as i32) * (-lam).exp() / factorial(k);
                }
            }
            p
        })
        .collect();
    let z: f64 = joint.iter().sum();
    joint.iter().map(|p| p / z).collect()
}

fn criterion_04() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for j_n in 1..=3 {
        for c_n in 1..=3 {
            for w_n in 1..=2 {
                let f = Array3::from_shape_simple_fn((j_n, c_n, w_n), || rng.random_range(0.1..20.0));
                let raw: Vec<f64> = (0..c_n).map(|_| rng.random_range(0.1..1.0)).collect();
                let priors = ClassProbabilities::from_weights(&raw).unwrap();
                let model = BayesModel {
                    f: f.clone(),
                    priors: priors.clone(),
                    window_ms: 10.0,
                };
                let cells = j_n * w_n;
                let mut counts = vec![0u32; cells];
                loop {
                    let rates = RateMatrix {
                        counts: Array2::from_shape_fn((j_n, w_n), |(j, w)| f64::from(counts[j * w_n + w])),
                        window_ms: 10.0,
                        trials: 1,
                    };
                    let (post, _) = bayes_decode(&rates, &model).unwrap();
                    let oracle = brute_force_posterior(&counts, &f, priors.as_slice());
                    for (a, b) in post.as_slice().iter().zip(&oracle) {
                        worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
                    }
                    checked += 1;
                    // Odometer over every count vector in {0..=10}^cells.
                    let mut i = 0;
                    while i < cells && counts[i] == 10 {
                        counts[i] = 0;
                        i += 1;
                    }
                    if i == cells {
                        break;
                    }
                    counts[i] += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 60.0,
        format!("Bayes vs brute-force pmf product on {checked} grid points: max relative error {worst:.2e}, {secs:.2}s"),
    )
}

fn criterion_05() -> Outcome {
    let p = LifParams::excitatory();
    let dt = 0.1;
    let integ = Integrator::new(p, dt).unwrap();
    let decay_e = (-dt / p.tau_ge).exp();
    let decay_i = (-dt / p.tau_gi).exp();
    let mut worst = 0.0f64;
    let mut spiked = false;
    for (g_e, g_i) in [(0.2, 0.0), (0.15, 0.05), (0.0, 0.3)] {
        let v_inf = (p.v_rest + g_e * p.e_exc + g_i * p.e_inh) / (1.0 + g_e + g_i);
        let tau = p.tau_m / (1.0 + g_e + g_i);
        let mut s = NeuronState::at_rest(&p);
        for k in 0..2000 {
            let (ke, ki) = if k == 0 {
                (g_e, g_i)
            } else {
                (g_e * (1.0 - decay_e), g_i * (1.0 - decay_i))
            };
            spiked |= integ.step(&mut s, ke, ki, 0.0).unwrap();
            let t = (k + 1) as f64 * dt;
            let exact = v_inf + (p.v_rest - v_inf) * (-t / tau).exp();
            worst = worst.max((s.v - exact).abs() / exact.abs());
        }
    }
    outcome(
        worst <= 1e-3 && !spiked,
        format!("clamped-conductance membrane vs exponential solution, dt 0.1 ms over 200 ms: max relative error {worst:.2e}"),
    )
}

struct DeskRun {
    report: RunReport,
    seconds: f64,
}

fn desk_run() -> anyhow::Result<DeskRun> {
    let out = tempfile::tempdir()?;
    let mut cfg = ExperimentConfig::load(&workspace().join("configs/desk.toml"))?;
    cfg.output_dir = out.path().to_path_buf();
    let start = Instant::now();
    cmd_train(&cfg, out.path(), None)?;
    cmd_record(&cfg, out.path(), Split::Train, None)?;
    cmd_record(&cfg, out.path(), Split::Test, None)?;
    let report = cmd_evaluate(&cfg, out.path())?;
    Ok(DeskRun {
        report,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn criterion_06(run: &DeskRun) -> Outcome {
    let Some(row) = run.report.row(DecoderKind::Hmfr, CombinerKind::Am) else {
        return outcome(false, "no hmfr row in the desk report".into());
    };
    let accs = &row.member_accuracies;
    let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
    let per_member = run.seconds / run.report.n_members.max(1) as f64;
    outcome(
        !accs.is_empty() && min > 0.30 && run.seconds < 1800.0,
        format!(
            "desk STDP (100 neurons, 3000 train, 1000 test): HMFR member accuracies {}; \
             5-member pipeline {:.0}s on one core ({per_member:.0}s per member)",
            accs.iter().map(|a| format!("{:.1}%", 100.0 * a)).collect::<Vec<_>>().join(", "),
            run.seconds
        ),
    )
}

fn criterion_07(run: &DeskRun) -> Outcome {
    let Some(row) = run.report.row(DecoderKind::Bayes, CombinerKind::Ngm) else {
        return outcome(false, "no bayes x ngm row in the desk report".into());
    };
    let (Some(ad), Some(ens), Some(avg)) = (row.ad, row.ensemble_accuracy, row.avg_member_accuracy()) else {
        return outcome(false, format!("bayes x ngm cell did not complete: {:?}", row.status));
    };
    let worse = row
        .ad_examples
        .iter()
        .filter(|(_, a)| a.ensemble_error > a.avg_member_error + 1e-9)
        .count();
    outcome(
        ad.ambiguity > 0.0 && worse == 0 && !row.ad_examples.is_empty() && ens >= avg,
        format!(
            "5-member Bayes (10 ms) + NGM: ambiguity {:.4}, ensemble KL {:.4} vs member KL {:.4}, \
             {worse}/{} examples worse, accuracy {:.1}% vs member mean {:.1}%",
            ad.ambiguity,
            ad.ensemble_error,
            ad.avg_member_error,
            row.ad_examples.len(),
            100.0 * ens,
            100.0 * avg
        ),
    )
}

fn criterion_08() -> anyhow::Result<Outcome> {
    let out = tempfile::tempdir()?;
    let mut cfg = ExperimentConfig::load(&workspace().join("configs/synthetic.toml"))?;
    cfg.output_dir = out.path().to_path_buf();
    cmd_synth(&cfg, out.path())?;
    let report = cmd_evaluate(&cfg, out.path())?;
    let acc = |d: DecoderKind| {
        report
            .row(d, CombinerKind::Am)
            .and_then(|r| r.member_accuracies.first().copied())
    };
    let (Some(bayes), Some(hmfr)) = (acc(DecoderKind::Bayes), acc(DecoderKind::Hmfr)) else {
        return Ok(outcome(false, "synthetic report is missing a decoder row".into()));
    };
    let n = report.row(DecoderKind::Bayes, CombinerKind::Am).map_or(0, |r| r.n_test);
    Ok(outcome(
        n == 500 && bayes >= 0.95 && hmfr <= 0.60,
        format!(
            "synthetic timing code, {n} test examples: Bayes 10 ms {:.1}%, HMFR 350 ms {:.1}%",
            100.0 * bayes,
            100.0 * hmfr
        ),
    ))
}

fn criterion_09() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut accepted = 0;
    let mut exceptions = 0;
    while accepted < 10_000 {
        let c = rng.random_range(2..=10);
        let n = rng.random_range(c..=4 * c);
        let mut assignment: Vec<usize> = (0..n).map(|j| j % c).collect();
        for a in assignment.iter_mut().skip(c) {
            *a = rng.random_range(0..c);
        }
        let pop = PopulationMap::new(assignment, c).unwrap();
        let integer = rng.random_bool(0.5);
        let counts = Array2::from_shape_simple_fn((n, 1), || {
            if integer {
                f64::from(rng.random_range(0..6u32))
            } else {
                rng.random_range(0.0..30.0)
            }
        });
        let rates = RateMatrix {
            counts,
            window_ms: 350.0,
            trials: 1,
        };
        let d = hmfr_decode(&rates, &pop).unwrap();
        let top = d.scores[d.predicted];
        if top <= 0.0 || d.scores.iter().filter(|&&s| s == top).count() > 1 {
            continue;
        }
        accepted += 1;
        for m in [Normalization::Softmax, Normalization::Activity, Normalization::Max] {
            if norm_hmfr_decode(&rates, &pop, m).unwrap().1 != d.predicted {
                exceptions += 1;
            }
        }
    }
    outcome(
        exceptions == 0,
        format!("HMFR vs softmax/activity/max normalized HMFR on {accepted} score vectors: {exceptions} disagreements"),
    )
}

fn random_record(rng: &mut ChaCha8Rng, i: usize) -> SpikeRecord {
    let duration = rng.random_range(1.0..1000.0);
    let n = rng.random_range(0..8);
    SpikeRecord {
        example_id: format!("fuzz-{i}-{:x}", rng.random::<u32>()),
        trial_index: rng.random(),
        duration_ms: duration,
        label: rng.random_bool(0.8).then(|| rng.random_range(0..10)),
        trains: (0..n)
            .map(|j| {
                let mut t: Vec<f64> = (0..rng.random_range(0..20))
                    .map(|_| rng.random_range(0.0..duration))
                    .collect();
                t.sort_by(f64::total_cmp);
                t.dedup();
                SpikeTrain::new(j, t)
            })
            .collect(),
    }
}

fn trained_small_member(seed: u64, images: &[spike_ensemble::io::LabeledImage]) -> anyhow::Result<TrainedMember> {
    let presentation = PresentationParams::default();
    let mut network = build_diehl_cook(784, 10, &NetworkParams::default(), seed)?;
    train_unsupervised(&mut network, images, 1, &presentation, &StdpParams::default(), seed)?;
    let assignment = assign_classes(&network, images, &presentation, 10, seed)?;
    Ok(TrainedMember {
        seed,
        network,
        assignment,
    })
}

fn criterion_10() -> anyhow::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let records: Vec<SpikeRecord> = (0..10_000).map(|i| random_record(&mut rng, i)).collect();
    let mut buf = Vec::new();
    write_to(&mut buf, &records)?;
    let in_memory = read_from(buf.as_slice(), Path::new("memory"))? == records;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("fuzz.ndjson");
    write_records(&path, &records)?;
    let on_disk = read_records(&path)? == records;

    let images = read_mnist_dir(&workspace().join("data/mnist-5k"), "train", Some(20))?;
    let mut models_ok = 0;
    for seed in 1..=10 {
        let model = Model::Member(Box::new(trained_small_member(seed, &images)?));
        let file = dir.path().join(format!("member_{seed}.json"));
        save_model(&file, &model)?;
        if load_model(&file)? == model && from_bytes(&to_bytes(&model)?)? == model {
            models_ok += 1;
        }
    }
    Ok(outcome(
        in_memory && on_disk && models_ok == 10,
        format!(
            "10000 fuzzed records round-trip (memory {in_memory}, file {on_disk}); {models_ok}/10 trained models round-trip"
        ),
    ))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: u32, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:02} [{tag}] {}", o.detail);
        failures += usize::from(!o.pass);
    };
    let lift = |r: anyhow::Result<Outcome>| r.unwrap_or_else(|e| outcome(false, format!("error: {e:#}")));

    let cat = categorical_fuzz();
    report(1, criterion_01(&cat));
    report(2, criterion_02());
    report(3, criterion_03(&cat));
    report(4, criterion_04());
    report(5, criterion_05());
    match desk_run() {
        Ok(run) => {
            report(6, criterion_06(&run));
            report(7, criterion_07(&run));
        }
        Err(e) => {
            report(6, outcome(false, format!("desk pipeline failed: {e:#}")));
            report(7, outcome(false, "desk pipeline failed".into()));
        }
    }
    report(8, lift(criterion_08()));
    report(9, criterion_09());
    report(10, lift(criterion_10()));

    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
