use dropout_ode::ode::Trajectory;
use dropout_ode::polykernel::{DropoutRate, NetworkShape, WeightSet};
use dropout_ode::predictor::{
    attempt_rng, predict_envelope, prediction_grid, sample_trajectory, EnvelopeAccumulator, EnvelopeConfig,
    RunningMoments, TrajectoryEnvelope,
};
use dropout_ode::rng::{stream_rng, Stream};
use dropout_ode::TimeGrid;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `dx/dt = x² − x²` through two hidden units: dropping the second unit gives
/// `x²`, which blows up at `t = 1` from `x = 1`.
fn cancelling_squares() -> WeightSet {
    let shape = NetworkShape::new(1, 2, 1, 1).unwrap();
    WeightSet::from_parts(shape, vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, -1.0], vec![0.0]).unwrap()
}

fn small_random_net() -> WeightSet {
    let mut rng = stream_rng(11, Stream::Init);
    let mut w = WeightSet::random_init(NetworkShape::sprott_default(), &mut rng);
    for v in w.iter_mut() {
        *v *= 0.5;
    }
    w
}

/// Two-pass mean and `n − 1` standard deviation.
fn batch_moments(samples: &[Trajectory]) -> (Vec<f64>, Vec<f64>) {
    let len = samples[0].values().len();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; len];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    for s in samples {
        for ((q, v), m) in var.iter_mut().zip(s.values()).zip(&mean) {
            *q += (v - m) * (v - m);
        }
    }
    let std = if samples.len() < 2 {
        vec![0.0; len]
    } else {
        var.iter().map(|q| (q / (n - 1.0)).sqrt()).collect()
    };
    (mean, std)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn random_trajectories(n: usize, len: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TimeGrid::uniform(0.0, 0.1, len).unwrap();
    let offset: f64 = rng.random_range(-1e3..1e3);
    (0..n)
        .map(|_| {
            let v = (0..len * 3).map(|_| offset + rng.random_range(-5.0..5.0)).collect();
            Trajectory::new(grid.clone(), 3, v).unwrap()
        })
        .collect()
}

fn streaming(samples: &[Trajectory]) -> RunningMoments {
    let mut m = RunningMoments::new(samples[0].grid().clone(), 3);
    for s in samples {
        m.update(s).unwrap();
    }
    m
}

#[test]
fn streaming_matches_two_pass_for_a_thousand_samples() {
    let samples = random_trajectories(1000, 20, 1);
    let m = streaming(&samples);
    let (mean, std) = batch_moments(&samples);
    assert!(max_abs_diff(m.mean(), &mean) < 1e-10);
    assert!(max_abs_diff(&m.std(), &std) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn streaming_matches_two_pass(n in 1usize..200, len in 1usize..8, seed in any::<u64>()) {
        let samples = random_trajectories(n, len, seed);
        let m = streaming(&samples);
        let (mean, std) = batch_moments(&samples);
        prop_assert!(max_abs_diff(m.mean(), &mean) < 1e-10);
        prop_assert!(max_abs_diff(&m.std(), &std) < 1e-10);
        prop_assert!(m.std().iter().all(|&s| s >= 0.0));
    }
}

fn assert_symmetric(env: &TrajectoryEnvelope) {
    for i in 0..env.mean().len() {
        let (m, w) = (env.mean()[i], env.c_conf * env.std[i]);
        assert_eq!(env.upper()[i].to_bits(), (m + w).to_bits());
        assert_eq!(env.lower()[i].to_bits(), (m - w).to_bits());
        let above = env.upper()[i] - m;
        let below = m - env.lower()[i];
        assert!((above - below).abs() <= 4.0 * f64::EPSILON * (m.abs() + w));
    }
}

fn sample_cfg(m: usize) -> EnvelopeConfig {
    EnvelopeConfig {
        trajectories: m,
        ..EnvelopeConfig::default()
    }
}

#[test]
fn bands_are_symmetric_and_nested() {
    let w = small_random_net();
    let rate = DropoutRate::new(0.3).unwrap();
    let u0 = [0.3, -0.2, 0.1];
    let wide = predict_envelope(&w, rate, &u0, 0.0, 2.0, 40, &sample_cfg(200), 9).unwrap();
    let narrow_cfg = EnvelopeConfig {
        c_conf: 1.0,
        ..sample_cfg(200)
    };
    let narrow = predict_envelope(&w, rate, &u0, 0.0, 2.0, 40, &narrow_cfg, 9).unwrap();
    assert_symmetric(&wide);
    assert_symmetric(&narrow);
    assert_eq!(wide.mean(), narrow.mean());
    assert_eq!(wide.std, narrow.std);
    for i in 0..wide.mean().len() {
        assert!(wide.lower()[i] <= narrow.lower()[i] && narrow.upper()[i] <= wide.upper()[i]);
    }
    assert!(wide.std.iter().any(|&s| s > 1e-3));
}

#[test]
fn seeded_envelopes_do_not_depend_on_thread_count() {
    let w = small_random_net();
    let rate = DropoutRate::new(0.25).unwrap();
    let run = |threads| {
        let cfg = EnvelopeConfig {
            threads,
            ..sample_cfg(150)
        };
        predict_envelope(&w, rate, &[0.3, -0.2, 0.1], 0.0, 2.0, 50, &cfg, 5).unwrap()
    };
    let reference = run(Some(1));
    for threads in [None, Some(2), Some(3), Some(8)] {
        let env = run(threads);
        assert_eq!(env.bands, reference.bands);
        assert_eq!(env.std, reference.std);
        assert_eq!((env.retained, env.discarded), (reference.retained, reference.discarded));
    }
    assert_ne!(run(Some(1)).bands, {
        let cfg = sample_cfg(150);
        predict_envelope(&w, rate, &[0.3, -0.2, 0.1], 0.0, 2.0, 50, &cfg, 6).unwrap().bands
    });
}

#[test]
fn blow_ups_are_discarded_and_moments_use_exactly_the_retained_samples() {
    let w = cancelling_squares();
    let rate = DropoutRate::new(0.3).unwrap();
    let cfg = EnvelopeConfig {
        sigma_eps_exponent: None,
        ..sample_cfg(300)
    };
    let env = predict_envelope(&w, rate, &[1.0], 0.0, 2.0, 40, &cfg, 3).unwrap();
    assert!(env.discarded > 0);
    assert_eq!(env.retained, 300);

    // replay every attempt stream and keep the first M finite trajectories
    let grid = prediction_grid(0.0, 2.0, 40).unwrap();
    let mut kept = Vec::new();
    let mut discarded = 0;
    let mut attempt = 0;
    while kept.len() < 300 {
        let traj =
            sample_trajectory(&w, rate, &[1.0], &grid, cfg.method, cfg.mask_mode, &mut attempt_rng(3, attempt))
                .unwrap();
        if traj.blow_up().is_some() {
            discarded += 1;
        } else {
            kept.push(traj);
        }
        attempt += 1;
    }
    assert_eq!(discarded, env.discarded);
    let (mean, std) = batch_moments(&kept);
    assert!(max_abs_diff(env.mean(), &mean) < 1e-10);
    assert!(max_abs_diff(&env.std, &std) < 1e-10);
}

#[test]
fn injected_blow_ups_leave_statistics_unchanged() {
    let samples = random_trajectories(50, 6, 4);
    let grid = samples[0].grid().clone();
    let mut blown = samples[0].values().to_vec();
    blown[7] = f64::INFINITY;
    blown[8..].fill(f64::NAN);
    let blown = Trajectory::new(grid.clone(), 3, blown).unwrap();

    let mut clean = EnvelopeAccumulator::new(grid.clone(), 3, 50);
    let mut mixed = EnvelopeAccumulator::new(grid, 3, 50);
    for (i, s) in samples.iter().enumerate() {
        assert!(clean.offer(s).unwrap());
        if i % 7 == 0 {
            assert!(!mixed.offer(&blown).unwrap());
        }
        assert!(mixed.offer(s).unwrap());
    }
    assert!(!mixed.offer(&samples[0]).unwrap());
    assert_eq!(mixed.discarded(), 8);
    let (a, b) = (clean.finish(1.96, 0.0).unwrap(), mixed.finish(1.96, 0.0).unwrap());
    assert_eq!(a.bands, b.bands);
    assert_eq!(a.std, b.std);
}
