use proptest::prelude::*;
use spike_ensemble::io::LabeledImage;
use spike_ensemble::lif::{build_diehl_cook, poisson_encode, Integrator, LifParams, NetworkParams, NeuronState};
use spike_ensemble::stdp::{
    apply_stdp_on_postspike, stdp_delta, train_unsupervised, update_trace, PresentationParams, StdpParams,
    TraceState,
};
use spike_ensemble::SpikeTrain;

/// Drives one neuron with a conductance held at `g` and returns its spike times.
fn clamped_run(g: f64, dt: f64, duration: f64) -> Vec<f64> {
    let p = LifParams::excitatory();
    let integ = Integrator::new(p, dt).unwrap();
    let decay = (-dt / p.tau_ge).exp();
    let mut s = NeuronState::at_rest(&p);
    let mut out = Vec::new();
    for k in 0..(duration / dt).round() as usize {
        let kick = if k == 0 { g } else { g * (1.0 - decay) };
        if integ.step(&mut s, kick, 0.0, 0.0).unwrap() {
            out.push(k as f64 * dt);
        }
    }
    out
}

#[test]
fn first_passage_matches_closed_form() {
    let p = LifParams::excitatory();
    let g = 0.5;
    let v_inf = (p.v_rest + g * p.e_exc) / (1.0 + g);
    let tau = p.tau_m / (1.0 + g);
    let t_star = -tau * ((p.v_th - v_inf) / (p.v_rest - v_inf)).ln();
    let dt = 0.1;
    let first = clamped_run(g, dt, 200.0)[0];
    assert!((first - t_star).abs() <= 2.0 * dt, "first spike {first}, closed form {t_star}");
}

#[test]
fn halving_dt_moves_spikes_by_at_most_dt() {
    let dt = 0.1;
    let coarse = clamped_run(0.5, dt, 200.0);
    let fine = clamped_run(0.5, dt / 2.0, 200.0);
    assert!(coarse.len() >= 3);
    assert_eq!(coarse.len(), fine.len());
    for (a, b) in coarse.iter().zip(&fine) {
        assert!((a - b).abs() <= dt + 1e-9, "{a} vs {b}");
    }
}

#[test]
fn encoded_count_mean_matches_rate() {
    // Full intensity: 63.75 Hz over 350 ms is 22.3125 expected spikes.
    let n = 10_000;
    let total: usize = (0..n)
        .map(|s| poisson_encode(&[255], 63.75, 350.0, s).unwrap()[0].len())
        .sum();
    let mean = total as f64 / n as f64;
    assert!((mean - 22.3125).abs() < 0.15, "mean count {mean}");
}

fn images(n: usize, pixels: usize, seed: u64) -> Vec<LabeledImage> {
    use rand::Rng;
    let mut rng = spike_ensemble::seed::rng(seed);
    (0..n)
        .map(|i| LabeledImage {
            pixels: (0..pixels).map(|_| rng.random_range(0..=255u8)).collect(),
            label: (i % 3) as u8,
        })
        .collect()
}

fn small_params() -> NetworkParams {
    NetworkParams {
        init_fraction: 1.0,
        ..NetworkParams::default()
    }
}

fn fast_presentation() -> PresentationParams {
    PresentationParams {
        duration_ms: 100.0,
        ..PresentationParams::default()
    }
}

#[test]
fn zero_learning_rate_leaves_weights_untouched() {
    let data = images(5, 32, 3);
    let mut net = build_diehl_cook(32, 4, &small_params(), 7).unwrap();
    let before = net.w_input_exc.clone();
    let stdp = StdpParams {
        eta: 0.0,
        ..StdpParams::default()
    };
    let stats = train_unsupervised(&mut net, &data, 1, &fast_presentation(), &stdp, 11).unwrap();
    assert!(stats.output_spikes > 0);
    assert_eq!(net.w_input_exc, before);
}

#[test]
fn zero_passes_is_the_identity() {
    let data = images(3, 32, 3);
    let mut net = build_diehl_cook(32, 4, &small_params(), 7).unwrap();
    let before = net.clone();
    train_unsupervised(&mut net, &data, 0, &fast_presentation(), &StdpParams::default(), 1).unwrap();
    assert_eq!(net, before);
}

#[test]
fn training_is_deterministic_and_bounded() {
    let data = images(6, 32, 5);
    let stdp = StdpParams {
        eta: 0.2,
        ..StdpParams::default()
    };
    let run = || {
        let mut net = build_diehl_cook(32, 4, &small_params(), 9).unwrap();
        train_unsupervised(&mut net, &data, 2, &fast_presentation(), &stdp, 13).unwrap();
        net
    };
    let a = run();
    assert_eq!(a, run());
    assert_ne!(a.w_input_exc, build_diehl_cook(32, 4, &small_params(), 9).unwrap().w_input_exc);
    assert!(a.w_input_exc.iter().all(|&w| (0.0..=stdp.w_max).contains(&w)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn frozen_runs_respect_refractory_and_membrane_bounds(
        init_seed in any::<u64>(),
        input_seed in any::<u64>(),
        pixels in prop::collection::vec(any::<u8>(), 24),
        lateral in 0.0f64..10.0,
    ) {
        let params = NetworkParams { lateral_weight: lateral, ..small_params() };
        let mut net = build_diehl_cook(24, 5, &params, init_seed).unwrap();
        net.theta = (0..5).map(|j| j as f64 * 0.5).collect();
        let input = poisson_encode(&pixels, 200.0, 120.0, input_seed).unwrap();
        let exc = params.exc;
        let mut worst = None;
        let rec = net
            .simulate_observed(&input, 120.0, 0.5, |k, states, theta| {
                for (s, th) in states.iter().zip(theta) {
                    if !(exc.e_inh <= s.v && s.v <= exc.v_th + th) && worst.is_none() {
                        worst = Some((k, s.v));
                    }
                }
            })
            .unwrap();
        prop_assert!(worst.is_none(), "membrane out of bounds: {:?}", worst);
        let ceiling = (120.0 / exc.tau_ref).floor() as usize + 1;
        for t in &rec.trains {
            prop_assert!(t.len() <= ceiling);
        }
        prop_assert_eq!(&rec, &net.simulate_frozen(&input, 120.0, 0.5).unwrap());
    }

    #[test]
    fn single_updates_keep_weights_in_range(
        w in prop::collection::vec(0.0f64..=1.0, 6),
        x in prop::collection::vec(0.0f64..5.0, 3),
        eta in 0.0f64..2.0,
        mu in 0.05f64..=1.0,
    ) {
        let mut net = build_diehl_cook(3, 2, &NetworkParams::default(), 1).unwrap();
        net.w_input_exc = w;
        let stdp = StdpParams { eta, mu, ..StdpParams::default() };
        let mut tr = TraceState::new(3);
        tr.x_pre = x;
        apply_stdp_on_postspike(&mut net, 1, &tr, &stdp).unwrap();
        prop_assert!(net.w_input_exc.iter().all(|&v| (0.0..=stdp.w_max).contains(&v)));
        prop_assert!((net.theta[1] - stdp.theta_plus).abs() < 1e-15);
    }

    #[test]
    fn delta_strictly_decreases_in_w(x in 0.41f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!((a - b).abs() > 1e-9);
        let p = StdpParams::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(stdp_delta(lo, x, &p) > stdp_delta(hi, x, &p));
    }

    #[test]
    fn trace_decays_exponentially(x0 in 0.0f64..10.0, t in 0.0f64..200.0, tau in 1.0f64..100.0) {
        let x = update_trace(x0, t, tau, false);
        prop_assert!((x - x0 * (-t / tau).exp()).abs() <= 1e-12);
    }

    #[test]
    fn conductance_decays_exactly_without_input(g in 0.0f64..5.0, dt in 0.01f64..2.0) {
        let p = LifParams::excitatory();
        let integ = Integrator::new(p, dt).unwrap();
        let mut s = NeuronState { g_e: g, ..NeuronState::at_rest(&p) };
        integ.step(&mut s, 0.0, 0.0, 0.0).unwrap();
        prop_assert!((s.g_e - g * (-dt / p.tau_ge).exp()).abs() <= 1e-12);
    }
}

#[test]
fn empty_trains_produce_silence() {
    let net = build_diehl_cook(4, 3, &NetworkParams::default(), 2).unwrap();
    let input: Vec<SpikeTrain> = (0..4).map(SpikeTrain::empty).collect();
    let rec = net.simulate_frozen(&input, 50.0, 0.5).unwrap();
    assert_eq!(rec.total_spikes(), 0);
}
