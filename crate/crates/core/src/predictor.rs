//! Monte-Carlo dropout trajectory envelopes.
//!
//! Each sample draws a dropout mask, integrates the masked network from the
//! initial state, and is discarded if it blows up before the horizon. The
//! first `M` finite samples are folded into per-point running moments, and
//! the envelope is `mean ± c · std`.

use std::cell::RefCell;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ode::{integrate, Method, TimeGrid, Trajectory, VectorField};
use crate::polykernel::{DropoutMask, DropoutRate, WeightSet};
use crate::rng::{stream_rng, Stream};

/// The network under one fixed dropout mask, as an ODE right-hand side.
pub struct MaskedField<'a> {
    weights: &'a WeightSet,
    mask: DropoutMask,
}

impl<'a> MaskedField<'a> {
    pub fn new(weights: &'a WeightSet, mask: DropoutMask) -> Result<Self> {
        let shape = weights.shape();
        if shape.input_dim != shape.output_dim {
            return Err(Error::ShapeMismatch(format!(
                "a vector field needs input_dim == output_dim, got {} and {}",
                shape.input_dim, shape.output_dim
            )));
        }
        if mask.len() != shape.hidden_dim {
            return Err(Error::ShapeMismatch("mask length differs from hidden_dim".into()));
        }
        Ok(Self { weights, mask })
    }

    pub fn mask(&self) -> &DropoutMask {
        &self.mask
    }
}

impl VectorField for MaskedField<'_> {
    fn dim(&self) -> usize {
        self.weights.shape().input_dim
    }

    fn eval(&self, u: &[f64], du: &mut [f64]) {
        self.weights.forward_into(u, &self.mask, du)
    }
}

/// Draws a new mask at every right-hand-side evaluation.
struct ResampledField<'a> {
    weights: &'a WeightSet,
    rate: DropoutRate,
    rng: RefCell<&'a mut ChaCha8Rng>,
}

impl VectorField for ResampledField<'_> {
    fn dim(&self) -> usize {
        self.weights.shape().input_dim
    }

    fn eval(&self, u: &[f64], du: &mut [f64]) {
        let k = self.weights.shape().hidden_dim;
        let mask = DropoutMask::sample(self.rate, k, &mut **self.rng.borrow_mut());
        self.weights.forward_into(u, &mask, du)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// One mask held fixed along the whole trajectory.
    #[default]
    PerTrajectory,
    /// A fresh mask at every right-hand-side evaluation.
    PerEvaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    /// Finite trajectories to retain (`M`).
    pub trajectories: usize,
    /// Confidence multiplier `c`.
    pub c_conf: f64,
    /// Exponent `m` in `σ_ε = h^m`; `None` leaves the integration error out.
    pub sigma_eps_exponent: Option<i32>,
    pub method: Method,
    /// Cap on sampled trajectories; defaults to `10 · M`.
    pub max_attempts: Option<usize>,
    pub mask_mode: MaskMode,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            trajectories: 1000,
            c_conf: 1.96,
            sigma_eps_exponent: Some(4),
            method: Method::Rk45 { tol: 1e-8 },
            max_attempts: None,
            mask_mode: MaskMode::PerTrajectory,
            threads: None,
        }
    }
}

impl EnvelopeConfig {
    pub fn max_attempts(&self) -> usize {
        self.max_attempts.unwrap_or(10 * self.trajectories)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(invalid("at least one trajectory must be retained"));
        }
        if !(self.c_conf > 0.0 && self.c_conf.is_finite()) {
            return Err(invalid(format!("confidence multiplier must be positive, got {}", self.c_conf)));
        }
        if self.max_attempts() < self.trajectories {
            return Err(invalid("max_attempts must be >= the number of retained trajectories"));
        }
        if self.threads == Some(0) {
            return Err(invalid("thread count must be >= 1"));
        }
        self.method.validate()
    }

    pub fn sigma_eps(&self, h: f64) -> f64 {
        self.sigma_eps_exponent.map_or(0.0, |m| h.powi(m))
    }
}

/// One Monte-Carlo sample: draw a mask from `rng` and integrate the masked
/// network over `grid`. Blow-ups are reported on the trajectory.
pub fn sample_trajectory(
    weights: &WeightSet,
    rate: DropoutRate,
    u0: &[f64],
    grid: &TimeGrid,
    method: Method,
    mask_mode: MaskMode,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    match mask_mode {
        MaskMode::PerTrajectory => {
            let mask = DropoutMask::sample(rate, weights.shape().hidden_dim, rng);
            integrate(&MaskedField::new(weights, mask)?, u0, grid, method)
        }
        MaskMode::PerEvaluation => {
            // validates shapes
            MaskedField::new(weights, DropoutMask::ones(weights.shape().hidden_dim))?;
            let field = ResampledField {
                weights,
                rate,
                rng: RefCell::new(rng),
            };
            integrate(&field, u0, grid, method)
        }
    }
}

/// Per-point, per-component streaming mean and squared-deviation sums.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    grid: TimeGrid,
    dim: usize,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(grid: TimeGrid, dim: usize) -> Self {
        let n = grid.len() * dim;
        Self {
            grid,
            dim,
            count: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn update(&mut self, traj: &Trajectory) -> Result<()> {
        if let Some(b) = traj.blow_up() {
            return Err(invalid(format!("blown-up trajectory (index {}) cannot be accumulated", b.index)));
        }
        if traj.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "trajectory dimension {} vs {}",
                traj.dim(),
                self.dim
            )));
        }
        self.grid.check_matches(traj.grid())?;
        self.count += 1;
        let n = self.count as f64;
        for ((x, mean), m2) in traj.values().iter().zip(&mut self.mean).zip(&mut self.m2) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Sample standard deviation with the `1 / (M − 1)` normalisation; zero
    /// for fewer than two samples.
    pub fn std(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.m2.len()];
        }
        let denom = (self.count - 1) as f64;
        self.m2.iter().map(|m2| (m2.max(0.0) / denom).sqrt()).collect()
    }
}

/// Mean and confidence bounds per grid point and component, stored row-major
/// (`point * dim + component`).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeBands {
    pub grid: TimeGrid,
    pub dim: usize,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl EnvelopeBands {
    fn check_component(&self, reference: &Trajectory, component: usize) -> Result<()> {
        if component >= self.dim || component >= reference.dim() {
            return Err(invalid(format!("component {component} out of range")));
        }
        self.grid.check_matches(reference.grid())
    }

    fn inside(&self, reference: &Trajectory, component: usize) -> impl Iterator<Item = bool> + '_ {
        let values = reference.component(component);
        (0..self.grid.len()).map(move |i| {
            let idx = i * self.dim + component;
            self.lower[idx] <= values[i] && values[i] <= self.upper[idx]
        })
    }

    /// Fraction of grid points where `lower ≤ reference ≤ upper`.
    pub fn coverage(&self, reference: &Trajectory, component: usize) -> Result<f64> {
        self.check_component(reference, component)?;
        let hits = self.inside(reference, component).filter(|&b| b).count();
        Ok(hits as f64 / self.grid.len() as f64)
    }

    /// Time of the first grid point where the reference leaves the band.
    pub fn first_miss(&self, reference: &Trajectory, component: usize) -> Result<Option<f64>> {
        self.check_component(reference, component)?;
        let idx = self.inside(reference, component).position(|b| !b);
        Ok(idx.map(|i| self.grid.times()[i]))
    }

    /// Mean of `upper − lower` for one component over grid points with
    /// `t_from ≤ t ≤ t_to`.
    pub fn mean_band_width(&self, component: usize, t_from: f64, t_to: f64) -> Result<f64> {
        if component >= self.dim {
            return Err(invalid(format!("component {component} out of range")));
        }
        let (sum, n) = self
            .grid
            .times()
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= t_from && t <= t_to)
            .fold((0.0, 0usize), |(s, n), (i, _)| {
                let idx = i * self.dim + component;
                (s + (self.upper[idx] - self.lower[idx]), n + 1)
            });
        if n == 0 {
            return Err(invalid(format!("no grid points in [{t_from}, {t_to}]")));
        }
        Ok(sum / n as f64)
    }

    /// Keeps only grid points with `t ≤ t_to`.
    pub fn truncated(&self, t_to: f64) -> Result<Self> {
        let n = self.grid.times().iter().take_while(|&&t| t <= t_to).count();
        let grid = TimeGrid::from_times(self.grid.times()[..n].to_vec())?;
        let cut = n * self.dim;
        Ok(Self {
            grid,
            dim: self.dim,
            mean: self.mean[..cut].to_vec(),
            lower: self.lower[..cut].to_vec(),
            upper: self.upper[..cut].to_vec(),
        })
    }
}

/// Envelope plus the statistics it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnvelope {
    pub bands: EnvelopeBands,
    /// Reported per-point spread; the bounds are `mean ± c_conf · std`.
    pub std: Vec<f64>,
    pub retained: usize,
    pub discarded: usize,
    pub c_conf: f64,
    pub sigma_eps: f64,
}

impl TrajectoryEnvelope {
    pub fn grid(&self) -> &TimeGrid {
        &self.bands.grid
    }

    pub fn dim(&self) -> usize {
        self.bands.dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.bands.mean
    }

    pub fn lower(&self) -> &[f64] {
        &self.bands.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.bands.upper
    }

    pub fn coverage(&self, reference: &Trajectory, component: usize) -> Result<f64> {
        self.bands.coverage(reference, component)
    }

    pub fn meta(&self, seed: u64) -> EnvelopeMeta {
        EnvelopeMeta {
            retained: self.retained,
            discarded: self.discarded,
            m: self.retained,
            c_conf: self.c_conf,
            sigma_eps: self.sigma_eps,
            seed,
        }
    }
}

/// Side-car metadata written next to an envelope CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeMeta {
    pub retained: usize,
    pub discarded: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub c_conf: f64,
    pub sigma_eps: f64,
    pub seed: u64,
}

/// Folds candidate trajectories in order, discarding blow-ups, until the
/// required number of finite ones has been seen.
#[derive(Debug, Clone)]
pub struct EnvelopeAccumulator {
    required: usize,
    moments: RunningMoments,
    discarded: usize,
}

impl EnvelopeAccumulator {
    pub fn new(grid: TimeGrid, dim: usize, required: usize) -> Self {
        Self {
            required,
            moments: RunningMoments::new(grid, dim),
            discarded: 0,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.moments.count() >= self.required
    }

    pub fn retained(&self) -> usize {
        self.moments.count()
    }

    pub fn discarded(&self) -> usize {
        self.discarded
    }

    /// Returns whether the trajectory was retained. Offers after completion
    /// are ignored.
    pub fn offer(&mut self, traj: &Trajectory) -> Result<bool> {
        if self.is_complete() {
            return Ok(false);
        }
        if traj.is_finite() {
            self.moments.update(traj)?;
            Ok(true)
        } else {
            self.discarded += 1;
            Ok(false)
        }
    }

    /// Bounds `mean ± c · std` with `std = sqrt(s² + σ_ε²)`, `s` the sample
    /// standard deviation.
    pub fn finish(self, c_conf: f64, sigma_eps: f64) -> Result<TrajectoryEnvelope> {
        if !self.is_complete() {
            return Err(Error::InsufficientTrajectories {
                required: self.required,
                retained: self.retained(),
                discarded: self.discarded,
                attempts: self.retained() + self.discarded,
            });
        }
        let std: Vec<f64> = self
            .moments
            .std()
            .into_iter()
            .map(|s| if sigma_eps == 0.0 { s } else { s.hypot(sigma_eps) })
            .collect();
        let mean = self.moments.mean().to_vec();
        let upper = mean.iter().zip(&std).map(|(m, s)| m + c_conf * s).collect();
        let lower = mean.iter().zip(&std).map(|(m, s)| m - c_conf * s).collect();
        Ok(TrajectoryEnvelope {
            bands: EnvelopeBands {
                grid: self.moments.grid,
                dim: self.moments.dim,
                mean,
                lower,
                upper,
            },
            std,
            retained: self.moments.count,
            discarded: self.discarded,
            c_conf,
            sigma_eps,
        })
    }
}

/// Grid `t_start + i h`, `i = 0..=n_intervals`, `h = (t_end − t_start) / n_intervals`.
pub fn prediction_grid(t_start: f64, t_end: f64, n_intervals: usize) -> Result<TimeGrid> {
    if !t_start.is_finite() || !t_end.is_finite() || t_end <= t_start {
        return Err(invalid(format!("need t_end > t_start, got [{t_start}, {t_end}]")));
    }
    if n_intervals < 2 {
        return Err(invalid("need at least two prediction intervals"));
    }
    TimeGrid::uniform(t_start, (t_end - t_start) / n_intervals as f64, n_intervals + 1)
}

/// Samples dropout trajectories until `cfg.trajectories` finite ones are
/// retained or `cfg.max_attempts()` have been drawn.
///
/// Attempt `i` always uses random stream `i` of `seed` and attempts are
/// folded in index order, so the result is identical for any thread count.
#[allow(clippy::too_many_arguments)]
pub fn predict_envelope(
    weights: &WeightSet,
    rate: DropoutRate,
    u0: &[f64],
    t_start: f64,
    t_end: f64,
    n_intervals: usize,
    cfg: &EnvelopeConfig,
    seed: u64,
) -> Result<TrajectoryEnvelope> {
    cfg.validate()?;
    let grid = prediction_grid(t_start, t_end, n_intervals)?;
    let h = grid.step().expect("uniform grid");
    let dim = weights.shape().input_dim;
    if u0.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "initial state has dimension {}, network has {dim}",
            u0.len()
        )));
    }

    let sample = |attempt: usize| {
        let mut rng = stream_rng(seed, Stream::Attempt(attempt as u64));
        sample_trajectory(weights, rate, u0, &grid, cfg.method, cfg.mask_mode, &mut rng)
    };

    let mut acc = EnvelopeAccumulator::new(grid.clone(), dim, cfg.trajectories);
    let max_attempts = cfg.max_attempts();
    let mut next = 0;
    with_threads(cfg.threads, || -> Result<()> {
        while !acc.is_complete() && next < max_attempts {
            let hi = (next + (cfg.trajectories - acc.retained()).max(16)).min(max_attempts);
            for traj in sample_range(next..hi, &sample) {
                if acc.is_complete() {
                    break;
                }
                acc.offer(&traj?)?;
                next += 1;
            }
        }
        Ok(())
    })?;

    if !acc.is_complete() {
        return Err(Error::InsufficientTrajectories {
            required: cfg.trajectories,
            retained: acc.retained(),
            discarded: acc.discarded(),
            attempts: next,
        });
    }
    acc.finish(cfg.c_conf, cfg.sigma_eps(h))
}

#[cfg(feature = "parallel")]
fn sample_range<F>(range: std::ops::Range<usize>, sample: &F) -> Vec<Result<Trajectory>>
where
    F: Fn(usize) -> Result<Trajectory> + Sync,
{
    use rayon::prelude::*;
    range.into_par_iter().map(sample).collect()
}

#[cfg(not(feature = "parallel"))]
fn sample_range<F>(range: std::ops::Range<usize>, sample: &F) -> Vec<Result<Trajectory>>
where
    F: Fn(usize) -> Result<Trajectory>,
{
    range.map(sample).collect()
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T>(_threads: Option<usize>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f()
}

/// Random stream used by attempt `attempt` of [`predict_envelope`].
pub fn attempt_rng(seed: u64, attempt: usize) -> ChaCha8Rng {
    stream_rng(seed, Stream::Attempt(attempt as u64))
}
