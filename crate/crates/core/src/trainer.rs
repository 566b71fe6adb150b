//! Fitting the polynomial kernel network to finite-difference derivative
//! targets under dropout.
//!
//! Each outer iteration draws one noisy copy of the derivative targets
//! (`N(target, σ_γ)` per component, `σ_γ = h²`) and then runs a short Adam
//! schedule on that batch, sampling a fresh dropout mask for every step.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ode::{TimeGrid, Trajectory};
use crate::polykernel::{loss_and_gradient, Batch, DropoutMask, DropoutRate, NetworkShape, WeightSet};
use crate::rng::{stream_rng, Stream};

/// Multiplier in `σ_γ = c h²`.
pub const C_GAMMA: f64 = 1.0;

/// Uniformly sampled, finite state observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    traj: Trajectory,
    h: f64,
}

impl ObservationSet {
    pub fn new(traj: Trajectory) -> Result<Self> {
        if traj.len() < 2 {
            return Err(invalid("an observation set needs at least two samples"));
        }
        if let Some(b) = traj.blow_up() {
            return Err(invalid(format!("observation {} is not finite", b.index)));
        }
        let h = traj.grid().require_uniform()?;
        Ok(Self { traj, h })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.traj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traj.is_empty()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.traj.grid()
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.traj
    }
}

/// Forward-difference derivative targets and their noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSet {
    pub points: Batch,
    pub sigma_gamma: f64,
}

/// `(u_{i+1} − u_i) / h` at each of the first `N − 1` states, with `σ_γ = h²`.
pub fn estimate_derivatives(obs: &ObservationSet) -> Result<DerivativeSet> {
    let traj = obs.trajectory();
    let h = obs.h();
    let n = traj.dim();
    let mut inputs = Vec::with_capacity((traj.len() - 1) * n);
    let mut targets = Vec::with_capacity((traj.len() - 1) * n);
    for i in 0..traj.len() - 1 {
        let (u, next) = (traj.state(i), traj.state(i + 1));
        inputs.extend_from_slice(u);
        targets.extend(u.iter().zip(next).map(|(a, b)| (b - a) / h));
    }
    Ok(DerivativeSet {
        points: Batch::new(n, n, inputs, targets)?,
        sigma_gamma: C_GAMMA * h * h,
    })
}

/// The full derivative set with every target component perturbed by
/// independent `N(0, σ_γ)` noise.
pub fn sample_training_batch<R: Rng + ?Sized>(set: &DerivativeSet, rng: &mut R) -> Batch {
    let mut batch = set.points.clone();
    if set.sigma_gamma > 0.0 {
        let noise = Normal::new(0.0, set.sigma_gamma).expect("positive finite sigma");
        for t in batch.targets_mut() {
            *t += noise.sample(rng);
        }
    }
    batch
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub outer_iters: usize,
    pub phase1_steps: usize,
    pub phase1_lr: f64,
    pub phase2_steps: usize,
    pub phase2_lr: f64,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            outer_iters: 1000,
            phase1_steps: 10,
            phase1_lr: 0.01,
            phase2_steps: 100,
            phase2_lr: 0.001,
        }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 || self.phase1_steps + self.phase2_steps == 0 {
            return Err(invalid("schedule must perform at least one step"));
        }
        for lr in [self.phase1_lr, self.phase2_lr] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(invalid(format!("learning rates must be positive, got {lr}")));
            }
        }
        Ok(())
    }

    fn phases(&self) -> [(usize, f64); 2] {
        [(self.phase1_steps, self.phase1_lr), (self.phase2_steps, self.phase2_lr)]
    }
}

/// Adam moment accumulators, flattened in [`WeightSet::iter`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: vec![0.0; n_params],
            second: vec![0.0; n_params],
            steps: 0,
        }
    }

    pub fn for_shape(shape: NetworkShape) -> Self {
        Self::new(shape.parameter_count())
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One bias-corrected update. A non-finite gradient leaves everything untouched.
    pub fn step<'a, P, G>(&mut self, params: P, grad: G, lr: f64) -> Result<()>
    where
        P: IntoIterator<Item = &'a mut f64>,
        G: IntoIterator<Item = &'a f64> + Clone,
    {
        if grad.clone().into_iter().any(|g| !g.is_finite()) {
            return Err(invalid("non-finite gradient"));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut count = 0;
        for (((p, &g), m), v) in params
            .into_iter()
            .zip(grad)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            count += 1;
        }
        debug_assert_eq!(count, self.first.len());
        Ok(())
    }

    pub fn step_weights(&mut self, weights: &mut WeightSet, grad: &WeightSet, lr: f64) -> Result<()> {
        if grad.shape() != weights.shape() || self.first.len() != weights.shape().parameter_count() {
            return Err(Error::ShapeMismatch("adam state, weights and gradient disagree".into()));
        }
        self.step(weights.iter_mut(), grad.iter(), lr)
    }
}

/// Independent seeds for initialisation, target noise and dropout masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSeeds {
    pub init: u64,
    pub noise: u64,
    pub mask: u64,
}

impl From<u64> for TrainSeeds {
    fn from(seed: u64) -> Self {
        Self {
            init: seed,
            noise: seed,
            mask: seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iter: usize,
    /// Mean dropout loss over the iteration's gradient steps.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub weights: WeightSet,
    pub log: Vec<LogEntry>,
}

/// Differences the observations and fits the network to them.
pub fn train(
    shape: NetworkShape,
    obs: &ObservationSet,
    rate: DropoutRate,
    schedule: &TrainingSchedule,
    seeds: impl Into<TrainSeeds>,
) -> Result<TrainingOutcome> {
    let set = estimate_derivatives(obs)?;
    train_on_derivatives(shape, &set, rate, schedule, seeds.into(), |_| {})
}

/// Fits a freshly initialised network to `set`. `on_iteration` sees every log
/// entry as it is produced.
pub fn train_on_derivatives(
    shape: NetworkShape,
    set: &DerivativeSet,
    rate: DropoutRate,
    schedule: &TrainingSchedule,
    seeds: TrainSeeds,
    mut on_iteration: impl FnMut(&LogEntry),
) -> Result<TrainingOutcome> {
    shape.validate()?;
    schedule.validate()?;
    if set.points.input_dim() != shape.input_dim || set.points.output_dim() != shape.output_dim {
        return Err(Error::ShapeMismatch(format!(
            "derivative set is {}→{}, network is {}→{}",
            set.points.input_dim(),
            set.points.output_dim(),
            shape.input_dim,
            shape.output_dim
        )));
    }
    if set.points.is_empty() {
        return Err(invalid("derivative set is empty"));
    }

    let mut weights = WeightSet::random_init(shape, &mut stream_rng(seeds.init, Stream::Init));
    let mut noise_rng = stream_rng(seeds.noise, Stream::TargetNoise);
    let mut mask_rng = stream_rng(seeds.mask, Stream::TrainMask);
    let mut adam = AdamState::for_shape(shape);
    let mut log = Vec::with_capacity(schedule.outer_iters);

    for iteration in 0..schedule.outer_iters {
        let batch = sample_training_batch(set, &mut noise_rng);
        let mut total = 0.0;
        let mut step = 0;
        for (steps, lr) in schedule.phases() {
            for _ in 0..steps {
                let mask = DropoutMask::sample(rate, shape.hidden_dim, &mut mask_rng);
                let (loss, grad) = loss_and_gradient(&weights, &batch, &mask)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteTraining {
                        what: "loss",
                        iteration,
                        step,
                    });
                }
                adam.step_weights(&mut weights, &grad, lr)
                    .map_err(|_| Error::NonFiniteTraining {
                        what: "gradient",
                        iteration,
                        step,
                    })?;
                total += loss;
                step += 1;
            }
        }
        let entry = LogEntry {
            iter: iteration,
            loss: total / step as f64,
        };
        on_iteration(&entry);
        log.push(entry);
    }
    if !weights.is_finite() {
        return Err(Error::NonFiniteTraining {
            what: "weights",
            iteration: schedule.outer_iters,
            step: 0,
        });
    }
    Ok(TrainingOutcome { weights, log })
}

/// Training settings as read from a JSON config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub h: f64,
    pub r: f64,
    pub outer_iters: usize,
    pub phase1_steps: usize,
    pub phase1_lr: f64,
    pub phase2_steps: usize,
    pub phase2_lr: f64,
    pub seed: u64,
    pub hidden_dim: usize,
    pub kernel_order: u32,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let s = TrainingSchedule::default();
        let shape = NetworkShape::sprott_default();
        Self {
            h: 1.0 / 500.0,
            r: 0.25,
            outer_iters: s.outer_iters,
            phase1_steps: s.phase1_steps,
            phase1_lr: s.phase1_lr,
            phase2_steps: s.phase2_steps,
            phase2_lr: s.phase2_lr,
            seed: 0,
            hidden_dim: shape.hidden_dim,
            kernel_order: shape.kernel_order,
        }
    }
}

impl TrainingConfig {
    pub fn schedule(&self) -> TrainingSchedule {
        TrainingSchedule {
            outer_iters: self.outer_iters,
            phase1_steps: self.phase1_steps,
            phase1_lr: self.phase1_lr,
            phase2_steps: self.phase2_steps,
            phase2_lr: self.phase2_lr,
        }
    }

    pub fn rate(&self) -> Result<DropoutRate> {
        DropoutRate::new(self.r)
    }

    pub fn shape(&self, dim: usize) -> Result<NetworkShape> {
        NetworkShape::new(dim, self.hidden_dim, dim, self.kernel_order)
    }
}
