//! Trains on Sprott B observations and prints field error and test-case coverage.
//!
//! ```text
//! cargo run --release -p dropout-ode --example sprott_b -- [r] [h_inv] [outer_iters] [seed]
//! ```

use std::time::Instant;

use dropout_ode::ode::{generate_observations, sprott_b_rhs};
use dropout_ode::predictor::predict_envelope;
use dropout_ode::trainer::{train, TrainingSchedule};
use dropout_ode::{DropoutRate, EnvelopeConfig, NetworkShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).map_or(Ok(default), |s| s.parse()).unwrap();
    let r = arg(0, 0.25);
    let h = 1.0 / arg(1, 500.0);
    let outer = arg(2, 200.0) as usize;
    let seed = arg(3, 0.0) as u64;

    let obs = generate_observations(&[1.0, 1.0, 1.0], 10.0, h)?;
    let rate = DropoutRate::new(r)?;
    let env_or = |key: &str, default: f64| std::env::var(key).map_or(default, |v| v.parse().unwrap());
    let schedule = TrainingSchedule {
        outer_iters: outer,
        phase1_steps: env_or("PHASE1_STEPS", 10.0) as usize,
        phase1_lr: env_or("PHASE1_LR", 0.01),
        phase2_steps: env_or("PHASE2_STEPS", 100.0) as usize,
        phase2_lr: env_or("PHASE2_LR", 0.001),
    };
    let start = Instant::now();
    let outcome = train(NetworkShape::sprott_default(), &obs, rate, &schedule, seed)?;
    println!("trained in {:.1?}, final loss {:.4e}", start.elapsed(), outcome.log.last().unwrap().loss);

    let w = &outcome.weights;
    let states = obs.trajectory();
    let field_err = states
        .states()
        .map(|u| {
            let truth = sprott_b_rhs(u).unwrap();
            let mean = w.expected_forward(u, rate);
            truth.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        })
        .sum::<f64>()
        / states.len() as f64;
    let ones = dropout_ode::DropoutMask::ones(w.shape().hidden_dim);
    let full_err = states
        .states()
        .map(|u| {
            let truth = sprott_b_rhs(u).unwrap();
            let y = w.forward(u, &ones);
            truth.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        })
        .sum::<f64>()
        / states.len() as f64;
    println!("mean field error: dropout expectation {field_err:.4}, mask disabled {full_err:.4}");

    let start = Instant::now();
    let env = predict_envelope(w, rate, &[-1.0, -1.0, -1.0], 0.0, 10.0, 1000, &EnvelopeConfig::default(), seed)?;
    let reference = generate_observations(&[-1.0, -1.0, -1.0], 10.0, 0.01)?.into_trajectory();
    let short = env.bands.truncated(3.0)?;
    let reference_short = dropout_ode::Trajectory::new(
        short.grid.clone(),
        3,
        reference.values()[..short.grid.len() * 3].to_vec(),
    )?;
    println!(
        "envelope in {:.1?}: retained {} discarded {}, coverage x on [0,3] {:.3}, on [0,10] {:.3}, first miss {:?}, mean width x {:.4}",
        start.elapsed(),
        env.retained,
        env.discarded,
        short.coverage(&reference_short, 0)?,
        env.coverage(&reference, 0)?,
        env.bands.first_miss(&reference, 0)?,
        env.bands.mean_band_width(0, 0.0, 10.0)?,
    );
    Ok(())
}
