//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Series cross the boundary as flat `Float64Array`s, one row per grid point:
//! `[t, x, y, z]` for trajectories and
//! `[t, mean_x, lo_x, hi_x, mean_y, lo_y, hi_y, mean_z, lo_z, hi_z]` for envelopes.

use dropout_ode::ode::{generate_observations, sprott_b_rhs};
use dropout_ode::polykernel::{DropoutRate, NetworkShape, WeightSet};
use dropout_ode::predictor::{predict_envelope, EnvelopeConfig};
use dropout_ode::trainer::{train, ObservationSet, TrainingSchedule};
use dropout_ode::{Error, Trajectory};
use wasm_bindgen::prelude::*;

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn state(u0: &[f64]) -> Result<[f64; 3], JsError> {
    u0.try_into()
        .map_err(|_| JsError::new(&format!("initial state needs 3 components, got {}", u0.len())))
}

fn rows(traj: &Trajectory) -> Vec<f64> {
    traj.grid()
        .times()
        .iter()
        .zip(traj.states())
        .flat_map(|(t, s)| std::iter::once(*t).chain(s.iter().copied()))
        .collect()
}

/// Sprott B sampled every `h` on `[0, t_end]`.
#[wasm_bindgen]
pub fn simulate(u0: &[f64], t_end: f64, h: f64) -> Result<Vec<f64>, JsError> {
    let obs = generate_observations(&state(u0)?, t_end, h).map_err(js_err)?;
    Ok(rows(obs.trajectory()))
}

/// A dropout network trained on Sprott B data from `(1, 1, 1)` over `[0, 10]`.
#[wasm_bindgen]
pub struct Model {
    weights: WeightSet,
    rate: DropoutRate,
    obs: ObservationSet,
    final_loss: f64,
}

#[wasm_bindgen]
impl Model {
    #[wasm_bindgen(constructor)]
    pub fn new(h: f64, r: f64, outer_iters: usize, seed: u64) -> Result<Model, JsError> {
        let rate = DropoutRate::new(r).map_err(js_err)?;
        let obs = generate_observations(&[1.0, 1.0, 1.0], 10.0, h).map_err(js_err)?;
        let schedule = TrainingSchedule {
            outer_iters,
            ..TrainingSchedule::default()
        };
        let out = train(NetworkShape::sprott_default(), &obs, rate, &schedule, seed).map_err(js_err)?;
        Ok(Model {
            final_loss: out.log.last().map_or(f64::NAN, |e| e.loss),
            weights: out.weights,
            rate,
            obs,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }

    #[wasm_bindgen(getter)]
    pub fn rate(&self) -> f64 {
        self.rate.value()
    }

    /// Mean over training states of `‖E[f(u)] − f_true(u)‖₂`.
    pub fn field_error(&self) -> f64 {
        let traj = self.obs.trajectory();
        let total: f64 = traj
            .states()
            .map(|u| {
                let truth = sprott_b_rhs(u).expect("3 components");
                let mean = self.weights.expected_forward(u, self.rate);
                mean.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            })
            .sum();
        total / traj.len() as f64
    }

    /// Monte-Carlo dropout envelope on `n` intervals of `[0, t_end]`.
    pub fn envelope(
        &self,
        u0: &[f64],
        t_end: f64,
        n: usize,
        trajectories: usize,
        c: f64,
        seed: u64,
    ) -> Result<Vec<f64>, JsError> {
        let cfg = EnvelopeConfig {
            trajectories,
            c_conf: c,
            ..EnvelopeConfig::default()
        };
        let env = predict_envelope(&self.weights, self.rate, &state(u0)?, 0.0, t_end, n, &cfg, seed)
            .map_err(js_err)?;
        let mut out = Vec::with_capacity(env.grid().len() * 10);
        for (i, t) in env.grid().times().iter().enumerate() {
            out.push(*t);
            for c in 0..3 {
                let k = 3 * i + c;
                out.extend([env.mean()[k], env.lower()[k], env.upper()[k]]);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_rows() {
        let out = simulate(&[1.0, 1.0, 1.0], 1.0, 0.5).unwrap();
        assert_eq!(out.len(), 3 * 4);
        assert_eq!(&out[..4], &[0.0, 1.0, 1.0, 1.0]);
        assert_eq!(out[8], 1.0);
    }

    #[test]
    fn model_envelope_rows() {
        let model = Model::new(0.05, 0.25, 2, 1).unwrap();
        assert!(model.final_loss.is_finite());
        assert!(model.field_error().is_finite());
        let env = model.envelope(&[-1.0, -1.0, -1.0], 1.0, 10, 20, 1.96, 0).unwrap();
        assert_eq!(env.len(), 11 * 10);
        assert_eq!(&env[1..4], &[-1.0, -1.0 - 1.96 * 0.1f64.powi(4), -1.0 + 1.96 * 0.1f64.powi(4)]);
    }
}
