//! Conductance-based leaky integrate-and-fire neurons and the three-layer
//! winner-take-all network (input, excitatory, inhibitory).
//!
//! Membrane dynamics:
//!
//! ```text
//! tau_m dv/dt = (v_rest - v) + g_e (E_exc - v) + g_i (E_inh - v)
//! tau_g dg/dt = -g
//! ```
//!
//! Conductances use the exact exponential update, the membrane uses explicit
//! Euler. Within one step the order is: add incoming conductance, integrate
//! `v` with the incremented conductances, test the threshold, decay the
//! conductances. Spikes are stamped with the start time of their step.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::spike::{SpikeRecord, SpikeTrain};
use crate::stdp::{self, StdpParams, TraceState};

/// Default integration step.
pub const DEFAULT_DT_MS: f64 = 0.5;

const REFRACTORY_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifParams {
    pub tau_m: f64,
    pub v_rest: f64,
    pub v_reset: f64,
    pub v_th: f64,
    pub e_exc: f64,
    pub e_inh: f64,
    pub tau_ge: f64,
    pub tau_gi: f64,
    pub tau_ref: f64,
}

impl LifParams {
    pub fn excitatory() -> Self {
        Self {
            tau_m: 100.0,
            v_rest: -65.0,
            v_reset: -65.0,
            v_th: -52.0,
            e_exc: 0.0,
            e_inh: -100.0,
            tau_ge: 1.0,
            tau_gi: 2.0,
            tau_ref: 5.0,
        }
    }

    pub fn inhibitory() -> Self {
        Self {
            tau_m: 10.0,
            tau_ref: 2.0,
            ..Self::excitatory()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.e_inh <= self.v_reset
            && self.v_reset <= self.v_rest
            && self.v_rest < self.v_th
            && self.v_th <= self.e_exc;
        if !ordered {
            return Err(Error::InvalidParameter(format!(
                "LIF potentials must satisfy E_inh <= v_reset <= v_rest < v_th <= E_exc: {self:?}"
            )));
        }
        let taus = [self.tau_m, self.tau_ge, self.tau_gi, self.tau_ref];
        if taus.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "LIF time constants must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub v: f64,
    pub g_e: f64,
    pub g_i: f64,
    pub refractory_remaining: f64,
}

impl NeuronState {
    pub fn at_rest(params: &LifParams) -> Self {
        Self {
            v: params.v_rest,
            g_e: 0.0,
            g_i: 0.0,
            refractory_remaining: 0.0,
        }
    }
}

/// Per-step constants for one parameter set and step size.
#[derive(Clone, Copy, Debug)]
pub struct Integrator {
    params: LifParams,
    dt: f64,
    dt_over_tau: f64,
    decay_e: f64,
    decay_i: f64,
}

impl Integrator {
    pub fn new(params: LifParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            params,
            dt,
            dt_over_tau: dt / params.tau_m,
            decay_e: (-dt / params.tau_ge).exp(),
            decay_i: (-dt / params.tau_gi).exp(),
        })
    }

    pub fn params(&self) -> &LifParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` by one step and reports whether it spiked. The
    /// effective threshold is `v_th + threshold_offset`.
    #[inline]
    pub fn step(
        &self,
        state: &mut NeuronState,
        exc_in: f64,
        inh_in: f64,
        threshold_offset: f64,
    ) -> Result<bool> {
        let p = &self.params;
        state.g_e += exc_in;
        state.g_i += inh_in;

        let spiked = if state.refractory_remaining > REFRACTORY_EPS {
            state.v = p.v_reset;
            state.refractory_remaining = (state.refractory_remaining - self.dt).max(0.0);
            false
        } else {
            let dv = (p.v_rest - state.v)
                + state.g_e * (p.e_exc - state.v)
                + state.g_i * (p.e_inh - state.v);
            // The exact trajectory never leaves [E_inh, E_exc]; clamping keeps
            // large explicit steps from overshooting the reversal potentials.
            state.v = (state.v + self.dt_over_tau * dv).clamp(p.e_inh, p.e_exc);
            if state.v >= p.v_th + threshold_offset {
                state.v = p.v_reset;
                state.refractory_remaining = p.tau_ref;
                true
            } else {
                false
            }
        };

        state.g_e *= self.decay_e;
        state.g_i *= self.decay_i;

        if !(state.v.is_finite() && state.g_e.is_finite() && state.g_i.is_finite()) {
            return Err(Error::Integration {
                step: 0,
                detail: format!("non-finite neuron state {state:?}"),
            });
        }
        Ok(spiked)
    }
}

/// One integration step of a single neuron.
pub fn step_neuron(
    state: NeuronState,
    params: &LifParams,
    dt: f64,
    exc_in: f64,
    inh_in: f64,
    threshold_offset: f64,
) -> Result<(NeuronState, bool)> {
    if !(exc_in >= 0.0 && inh_in >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "conductance increments must be non-negative, got {exc_in} / {inh_in}"
        )));
    }
    let integrator = Integrator::new(*params, dt)?;
    let mut next = state;
    let spiked = integrator.step(&mut next, exc_in, inh_in, threshold_offset)?;
    Ok((next, spiked))
}

/// Smallest single excitatory conductance kick that makes a resting neuron
/// fire, found by bisection on a fine grid.
pub fn threshold_crossing_drive(params: &LifParams) -> Result<f64> {
    const DT: f64 = 0.01;
    let integrator = Integrator::new(*params, DT)?;
    let horizon = (5.0 * params.tau_m.max(params.tau_ge) / DT).ceil() as usize;
    let fires = |g: f64| -> Result<bool> {
        let mut s = NeuronState::at_rest(params);
        for k in 0..horizon {
            let kick = if k == 0 { g } else { 0.0 };
            if integrator.step(&mut s, kick, 0.0, 0.0)? {
                return Ok(true);
            }
        }
        Ok(false)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while !fires(hi)? {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidParameter(
                "no finite conductance kick reaches threshold".into(),
            ));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fires(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Homogeneous Poisson spike trains, one per pixel, at
/// `intensity / 255 * max_rate_hz`.
pub fn poisson_encode(
    intensities: &[u8],
    max_rate_hz: f64,
    duration_ms: f64,
    seed: u64,
) -> Result<Vec<SpikeTrain>> {
    if !(max_rate_hz.is_finite() && max_rate_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "max rate must be positive, got {max_rate_hz}"
        )));
    }
    if !(duration_ms.is_finite() && duration_ms > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration must be positive, got {duration_ms}"
        )));
    }
    let mut rng = seed::rng(seed);
    let trains = intensities
        .iter()
        .enumerate()
        .map(|(i, &px)| {
            let per_ms = f64::from(px) / 255.0 * max_rate_hz / 1000.0;
            SpikeTrain::new(i, poisson_times(&mut rng, per_ms, 0.0, duration_ms))
        })
        .collect();
    Ok(trains)
}

/// Event times of a homogeneous Poisson process on `[start, end)`.
pub(crate) fn poisson_times<R: Rng>(rng: &mut R, rate_per_ms: f64, start: f64, end: f64) -> Vec<f64> {
    let mut times = Vec::new();
    if rate_per_ms <= 0.0 {
        return times;
    }
    let gaps = Exp::new(rate_per_ms).expect("positive rate");
    let mut t = start + gaps.sample(rng);
    while t < end {
        // Consecutive draws can collide after rounding; keep times strictly increasing.
        if times.last().is_none_or(|&last| t > last) {
            times.push(t);
        }
        t += gaps.sample(rng);
    }
    times
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub exc: LifParams,
    pub inh: LifParams,
    /// Upper bound of the plastic input weights.
    pub w_max: f64,
    /// Initial weights are drawn from `(0, init_fraction * w_max]`.
    pub init_fraction: f64,
    /// Inhibitory to excitatory conductance per inhibitory spike.
    pub lateral_weight: f64,
    /// Excitatory to inhibitory weight as a multiple of the inhibitory
    /// neuron's threshold-crossing drive.
    pub exc_inh_factor: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            exc: LifParams::excitatory(),
            inh: LifParams::inhibitory(),
            w_max: 1.0,
            init_fraction: 0.3,
            lateral_weight: 1.0,
            exc_inh_factor: 10.0,
        }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        self.exc.validate()?;
        self.inh.validate()?;
        let positive = [self.w_max, self.init_fraction, self.exc_inh_factor];
        if positive.iter().any(|&x| !(x.is_finite() && x > 0.0)) || self.init_fraction > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "invalid network weight parameters: {self:?}"
            )));
        }
        if !(self.lateral_weight.is_finite() && self.lateral_weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lateral weight must be non-negative, got {}",
                self.lateral_weight
            )));
        }
        Ok(())
    }
}

/// Input → excitatory (plastic, all-to-all), excitatory → inhibitory (static,
/// one-to-one), inhibitory → excitatory (static, all but the partner).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifNetwork {
    pub n_input: usize,
    pub n_exc: usize,
    pub params: NetworkParams,
    /// Row-major `n_input × n_exc`: weight from input `i` to neuron `j` is at
    /// `i * n_exc + j`.
    pub w_input_exc: Vec<f64>,
    pub w_exc_inh: f64,
    pub w_inh_exc: f64,
    /// Adaptive threshold offset per excitatory neuron, mV.
    pub theta: Vec<f64>,
}

/// All-to-all plastic input weights drawn uniformly from
/// `(0, init_fraction * w_max]`, static inhibitory loop per [`NetworkParams`].
pub fn build_diehl_cook(
    n_input: usize,
    n_exc: usize,
    params: &NetworkParams,
    init_seed: u64,
) -> Result<LifNetwork> {
    if n_input == 0 || n_exc == 0 {
        return Err(Error::InvalidParameter(
            "network layers must be non-empty".into(),
        ));
    }
    params.validate()?;
    let mut rng = seed::rng(init_seed);
    let hi = params.init_fraction * params.w_max;
    let w_input_exc = (0..n_input * n_exc)
        .map(|_| (1.0 - rng.random::<f64>()) * hi)
        .collect();
    Ok(LifNetwork {
        n_input,
        n_exc,
        w_exc_inh: params.exc_inh_factor * threshold_crossing_drive(&params.inh)?,
        w_inh_exc: params.lateral_weight,
        params: params.clone(),
        w_input_exc,
        theta: vec![0.0; n_exc],
    })
}

pub enum Plasticity<'a> {
    Off,
    On(&'a StdpParams),
}

enum Weights<'a> {
    Frozen(&'a [f64], &'a [f64]),
    Plastic {
        w: &'a mut [f64],
        theta: &'a mut [f64],
        stdp: &'a StdpParams,
    },
}

impl LifNetwork {
    pub fn n_inh(&self) -> usize {
        self.n_exc
    }

    pub fn weight(&self, input: usize, exc: usize) -> f64 {
        self.w_input_exc[input * self.n_exc + exc]
    }

    /// Inhibitory neurons that inhibit excitatory neuron `j`.
    pub fn lateral_sources(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_inh()).filter(move |&k| k != j)
    }

    pub fn num_plastic_weights(&self) -> usize {
        self.w_input_exc.len()
    }

    /// Presents `input` for `duration_ms`, starting from rest. With plasticity
    /// on, input weights and thresholds are updated in place.
    pub fn simulate(
        &mut self,
        input: &[SpikeTrain],
        duration_ms: f64,
        dt: f64,
        plasticity: Plasticity<'_>,
    ) -> Result<SpikeRecord> {
        match plasticity {
            Plasticity::Off => self.run(input, duration_ms, dt, |_, _, _| {}),
            Plasticity::On(stdp) => self.simulate_plastic(input, duration_ms, dt, stdp),
        }
    }

    /// Plasticity-off presentation; does not touch the network.
    pub fn simulate_frozen(
        &self,
        input: &[SpikeTrain],
        duration_ms: f64,
        dt: f64,
    ) -> Result<SpikeRecord> {
        self.run(input, duration_ms, dt, |_, _, _| {})
    }

    pub fn simulate_plastic(
        &mut self,
        input: &[SpikeTrain],
        duration_ms: f64,
        dt: f64,
        stdp: &StdpParams,
    ) -> Result<SpikeRecord> {
        stdp.validate()?;
        let mut w = std::mem::take(&mut self.w_input_exc);
        let mut theta = std::mem::take(&mut self.theta);
        let out = self.run_with(
            input,
            duration_ms,
            dt,
            Weights::Plastic {
                w: &mut w,
                theta: &mut theta,
                stdp,
            },
            |_, _, _| {},
        );
        self.w_input_exc = w;
        self.theta = theta;
        out
    }

    /// Frozen presentation that reports the excitatory layer after every
    /// step: `(step, states, theta)`.
    pub fn simulate_observed(
        &self,
        input: &[SpikeTrain],
        duration_ms: f64,
        dt: f64,
        observer: impl FnMut(usize, &[NeuronState], &[f64]),
    ) -> Result<SpikeRecord> {
        self.run(input, duration_ms, dt, observer)
    }

    fn run(
        &self,
        input: &[SpikeTrain],
        duration_ms: f64,
        dt: f64,
        observer: impl FnMut(usize, &[NeuronState], &[f64]),
    ) -> Result<SpikeRecord> {
        self.run_with(
            input,
            duration_ms,
            dt,
            Weights::Frozen(&self.w_input_exc, &self.theta),
            observer,
        )
    }

    fn run_with(
        &self,
        input: &[SpikeTrain],
        duration_ms: f64,
        dt: f64,
        mut weights: Weights<'_>,
        mut observer: impl FnMut(usize, &[NeuronState], &[f64]),
    ) -> Result<SpikeRecord> {
        if input.len() != self.n_input {
            return Err(Error::Shape(format!(
                "network has {} inputs, got {} trains",
                self.n_input,
                input.len()
            )));
        }
        if !(duration_ms.is_finite() && duration_ms > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "duration must be positive, got {duration_ms}"
            )));
        }
        let exc = Integrator::new(self.params.exc, dt)?;
        let inh = Integrator::new(self.params.inh, dt)?;
        let n_steps = (duration_ms / dt).round() as usize;
        let n_exc = self.n_exc;

        let mut events: Vec<(u32, u32)> = Vec::new();
        for (i, train) in input.iter().enumerate() {
            for &t in &train.times {
                let k = (t / dt).floor();
                if k >= 0.0 && (k as usize) < n_steps {
                    events.push((k as u32, i as u32));
                }
            }
        }
        events.sort_unstable();

        let mut exc_state = vec![NeuronState::at_rest(&self.params.exc); n_exc];
        let mut inh_state = vec![NeuronState::at_rest(&self.params.inh); n_exc];
        let mut exc_spiked_prev = vec![false; n_exc];
        let mut exc_spiked = vec![false; n_exc];
        let mut inh_spiked_prev = vec![false; n_exc];
        let mut inh_spiked = vec![false; n_exc];
        let mut ge_in = vec![0.0; n_exc];
        let mut trains: Vec<Vec<f64>> = vec![Vec::new(); n_exc];
        let mut spiking_inputs: Vec<usize> = Vec::new();

        let (mut traces, trace_decay, theta_decay) = match &weights {
            Weights::Plastic { stdp, .. } => (
                Some(TraceState::new(self.n_input)),
                (-dt / stdp.tau_trace).exp(),
                (-dt / stdp.tau_theta).exp(),
            ),
            Weights::Frozen(..) => (None, 1.0, 1.0),
        };

        let mut next_event = 0;
        for k in 0..n_steps {
            ge_in.iter_mut().for_each(|g| *g = 0.0);
            spiking_inputs.clear();
            while next_event < events.len() && events[next_event].0 as usize == k {
                spiking_inputs.push(events[next_event].1 as usize);
                next_event += 1;
            }
            {
                let w: &[f64] = match &weights {
                    Weights::Frozen(w, _) => w,
                    Weights::Plastic { w, .. } => w,
                };
                for &i in &spiking_inputs {
                    let row = &w[i * n_exc..(i + 1) * n_exc];
                    for (g, &wij) in ge_in.iter_mut().zip(row) {
                        *g += wij;
                    }
                }
            }
            if let Some(tr) = traces.as_mut() {
                tr.decay(trace_decay);
                for &i in &spiking_inputs {
                    tr.x_pre[i] += 1.0;
                }
            }

            let n_inh_prev = inh_spiked_prev.iter().filter(|&&s| s).count() as f64;
            let theta: &[f64] = match &weights {
                Weights::Frozen(_, theta) => theta,
                Weights::Plastic { theta, .. } => theta,
            };
            for j in 0..n_exc {
                let others = n_inh_prev - if inh_spiked_prev[j] { 1.0 } else { 0.0 };
                exc_spiked[j] = exc
                    .step(&mut exc_state[j], ge_in[j], self.w_inh_exc * others, theta[j])
                    .map_err(|e| at_step(e, k))?;
            }
            for j in 0..n_exc {
                let drive = if exc_spiked_prev[j] { self.w_exc_inh } else { 0.0 };
                inh_spiked[j] = inh
                    .step(&mut inh_state[j], drive, 0.0, 0.0)
                    .map_err(|e| at_step(e, k))?;
            }

            let t = k as f64 * dt;
            for (j, _) in exc_spiked.iter().enumerate().filter(|(_, &s)| s) {
                trains[j].push(t);
            }

            if let Weights::Plastic { w, theta, stdp } = &mut weights {
                let tr = traces.as_ref().expect("traces exist when plastic");
                for j in (0..n_exc).filter(|&j| exc_spiked[j]) {
                    stdp::update_column(w, n_exc, j, tr, stdp);
                    theta[j] += stdp.theta_plus;
                }
                theta.iter_mut().for_each(|th| *th *= theta_decay);
            }

            let theta_now: &[f64] = match &weights {
                Weights::Frozen(_, theta) => theta,
                Weights::Plastic { theta, .. } => theta,
            };
            observer(k, &exc_state, theta_now);

            std::mem::swap(&mut exc_spiked_prev, &mut exc_spiked);
            std::mem::swap(&mut inh_spiked_prev, &mut inh_spiked);
        }

        Ok(SpikeRecord {
            example_id: String::new(),
            trial_index: 0,
            duration_ms,
            label: None,
            trains: trains
                .into_iter()
                .enumerate()
                .map(|(j, times)| SpikeTrain::new(j, times))
                .collect(),
        })
    }
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::Integration { detail, .. } => Error::Integration { step, detail },
        other => other,
    }
}
