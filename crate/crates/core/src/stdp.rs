//! Trace-based STDP on the input → excitatory synapses, adaptive thresholds,
//! the unsupervised training loop and post-training class assignment.
//!
//! At every postsynaptic spike of excitatory neuron `j`, each incoming weight
//! moves by `eta * (x_pre - x_tar) * (w_max - w)^mu` and is clamped to
//! `[0, w_max]`; the neuron's threshold offset grows by `theta_plus`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::LabeledImage;
use crate::lif::{self, LifNetwork, DEFAULT_DT_MS};
use crate::seed::derive_seed;
use crate::spike::{argmax, PopulationMap};

const TRAIN_STREAM: u64 = 0x7261_696e;
const ASSIGN_STREAM: u64 = 0x6173_7367;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StdpParams {
    pub eta: f64,
    pub x_tar: f64,
    pub w_max: f64,
    pub mu: f64,
    pub tau_trace: f64,
    pub theta_plus: f64,
    pub tau_theta: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        Self {
            eta: 0.01,
            x_tar: 0.4,
            w_max: 1.0,
            mu: 1.0,
            tau_trace: 20.0,
            theta_plus: 0.05,
            tau_theta: 1e7,
        }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta >= 0.0
            && self.x_tar >= 0.0
            && self.w_max > 0.0
            && self.mu > 0.0
            && self.mu <= 1.0
            && self.tau_trace > 0.0
            && self.theta_plus >= 0.0
            && self.tau_theta > 0.0;
        let finite = [
            self.eta,
            self.x_tar,
            self.w_max,
            self.mu,
            self.tau_trace,
            self.theta_plus,
            self.tau_theta,
        ]
        .iter()
        .all(|x| x.is_finite());
        if ok && finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid STDP parameters: {self:?}")))
        }
    }
}

/// Weight change for one synapse at a postsynaptic spike. The caller clamps
/// `w + delta` into `[0, w_max]`.
pub fn stdp_delta(w: f64, x_pre: f64, p: &StdpParams) -> f64 {
    p.eta * (x_pre - p.x_tar) * (p.w_max - w).max(0.0).powf(p.mu)
}

/// Presynaptic traces, one per input synapse.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceState {
    pub x_pre: Vec<f64>,
}

impl TraceState {
    pub fn new(n_inputs: usize) -> Self {
        Self {
            x_pre: vec![0.0; n_inputs],
        }
    }

    pub(crate) fn decay(&mut self, factor: f64) {
        self.x_pre.iter_mut().for_each(|x| *x *= factor);
    }

    /// Decays every trace over `dt` and bumps the ones whose input spiked.
    pub fn advance(&mut self, dt: f64, tau_trace: f64, spiked: &[bool]) {
        for (x, &s) in self.x_pre.iter_mut().zip(spiked) {
            *x = update_trace(*x, dt, tau_trace, s);
        }
    }
}

/// `x * exp(-dt / tau_trace)`, plus one if the presynaptic neuron spiked.
pub fn update_trace(x: f64, dt: f64, tau_trace: f64, presyn_spiked: bool) -> f64 {
    let decayed = x * (-dt / tau_trace).exp();
    if presyn_spiked {
        decayed + 1.0
    } else {
        decayed
    }
}

/// Updates the weight column of excitatory neuron `post` in a row-major
/// `n_input × n_exc` matrix.
pub(crate) fn update_column(
    w: &mut [f64],
    n_exc: usize,
    post: usize,
    traces: &TraceState,
    p: &StdpParams,
) {
    for (i, &x) in traces.x_pre.iter().enumerate() {
        let wij = &mut w[i * n_exc + post];
        *wij = (*wij + stdp_delta(*wij, x, p)).clamp(0.0, p.w_max);
    }
}

/// Applies the postsynaptic-spike update for excitatory neuron `post`:
/// weights into it follow [`stdp_delta`] and its threshold offset grows.
pub fn apply_stdp_on_postspike(
    network: &mut LifNetwork,
    post: usize,
    traces: &TraceState,
    p: &StdpParams,
) -> Result<()> {
    if post >= network.n_exc {
        return Err(Error::InvalidParameter(format!(
            "excitatory index {post} out of range"
        )));
    }
    if traces.x_pre.len() != network.n_input {
        return Err(Error::Shape(format!(
            "{} traces for {} inputs",
            traces.x_pre.len(),
            network.n_input
        )));
    }
    update_column(&mut network.w_input_exc, network.n_exc, post, traces, p);
    network.theta[post] += p.theta_plus;
    Ok(())
}

/// How images are turned into input spikes and simulated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresentationParams {
    pub duration_ms: f64,
    pub dt_ms: f64,
    pub max_rate_hz: f64,
}

impl Default for PresentationParams {
    fn default() -> Self {
        // 255 / 4 = 63.75 Hz at full intensity.
        Self {
            duration_ms: 350.0,
            dt_ms: DEFAULT_DT_MS,
            max_rate_hz: 63.75,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainStats {
    pub examples: usize,
    pub output_spikes: usize,
    /// Examples during which no excitatory neuron fired.
    pub silent_examples: usize,
}

/// Unsupervised passes over `dataset`; labels are ignored. Weights and
/// thresholds carry over from one example to the next.
pub fn train_unsupervised(
    network: &mut LifNetwork,
    dataset: &[LabeledImage],
    passes: usize,
    presentation: &PresentationParams,
    stdp: &StdpParams,
    seed: u64,
) -> Result<TrainStats> {
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    stdp.validate()?;
    let mut stats = TrainStats::default();
    for pass in 0..passes {
        for (i, example) in dataset.iter().enumerate() {
            let s = derive_seed(&[seed, TRAIN_STREAM, pass as u64, i as u64]);
            let input = lif::poisson_encode(
                &example.pixels,
                presentation.max_rate_hz,
                presentation.duration_ms,
                s,
            )?;
            let rec = network.simulate_plastic(
                &input,
                presentation.duration_ms,
                presentation.dt_ms,
                stdp,
            )?;
            let n = rec.total_spikes();
            stats.examples += 1;
            stats.output_spikes += n;
            if n == 0 {
                stats.silent_examples += 1;
            }
        }
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAssignment {
    pub map: PopulationMap,
    /// Neurons that never fired; they default to class 0.
    pub silent: Vec<usize>,
    /// Mean spike count per neuron (rows) and class (columns).
    pub mean_counts: Array2<f64>,
}

/// Assigns each neuron the class with its highest mean response. Ties go to
/// the lowest class; a neuron silent on every class gets class 0 and is
/// listed in `silent`.
pub fn assign_from_responses(
    responses: &[(usize, Vec<f64>)],
    n_neurons: usize,
    n_classes: usize,
) -> Result<ClassAssignment> {
    let mut sums = Array2::<f64>::zeros((n_neurons, n_classes));
    let mut seen = vec![0usize; n_classes];
    for (label, counts) in responses {
        if *label >= n_classes {
            return Err(Error::InvalidParameter(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        if counts.len() != n_neurons {
            return Err(Error::Shape(format!(
                "{} responses for {n_neurons} neurons",
                counts.len()
            )));
        }
        seen[*label] += 1;
        for (j, &c) in counts.iter().enumerate() {
            sums[[j, *label]] += c;
        }
    }
    for (c, &n) in seen.iter().enumerate() {
        if n > 0 {
            sums.column_mut(c).mapv_inplace(|x| x / n as f64);
        }
    }
    let mut assignment = Vec::with_capacity(n_neurons);
    let mut silent = Vec::new();
    for (j, row) in sums.rows().into_iter().enumerate() {
        if row.iter().all(|&x| x == 0.0) {
            silent.push(j);
            assignment.push(0);
        } else {
            assignment.push(argmax(row.as_slice().expect("row is contiguous")));
        }
    }
    Ok(ClassAssignment {
        map: PopulationMap::new(assignment, n_classes)?,
        silent,
        mean_counts: sums,
    })
}

/// Presents every training example once with plasticity off and assigns
/// classes by highest mean response.
pub fn assign_classes(
    network: &LifNetwork,
    dataset: &[LabeledImage],
    presentation: &PresentationParams,
    n_classes: usize,
    seed: u64,
) -> Result<ClassAssignment> {
    let mut responses = Vec::with_capacity(dataset.len());
    for (i, example) in dataset.iter().enumerate() {
        let s = derive_seed(&[seed, ASSIGN_STREAM, i as u64]);
        let input = lif::poisson_encode(
            &example.pixels,
            presentation.max_rate_hz,
            presentation.duration_ms,
            s,
        )?;
        let rec = network.simulate_frozen(&input, presentation.duration_ms, presentation.dt_ms)?;
        let counts = rec.trains.iter().map(|t| t.len() as f64).collect();
        responses.push((usize::from(example.label), counts));
    }
    assign_from_responses(&responses, network.n_exc, n_classes)
}
