//! Autonomous ODE right-hand sides, integrators and trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trainer::ObservationSet;

/// Right-hand side `du/dt = f(u)` of an autonomous system.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, u: &[f64], du: &mut [f64]);
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, u: &[f64], du: &mut [f64]) {
        (**self).eval(u, du)
    }
}

/// Adapts a closure into a [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, u: &[f64], du: &mut [f64]) {
        (self.f)(u, du)
    }
}

/// The Sprott B system: `x' = yz`, `y' = x - y`, `z' = 1 - xy`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SprottB;

impl VectorField for SprottB {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, u: &[f64], du: &mut [f64]) {
        let (x, y, z) = (u[0], u[1], u[2]);
        du[0] = y * z;
        du[1] = x - y;
        du[2] = 1.0 - x * y;
    }
}

pub fn sprott_b_rhs(u: &[f64]) -> Result<[f64; 3]> {
    if u.len() != 3 {
        return Err(Error::ShapeMismatch(format!("Sprott B state has dimension 3, got {}", u.len())));
    }
    let mut du = [0.0; 3];
    SprottB.eval(u, &mut du);
    Ok(du)
}

/// Strictly increasing output times, optionally flagged as uniformly spaced.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    times: Vec<f64>,
    step: Option<f64>,
}

/// Grids are equal when their times are bit-identical.
impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        self.times == other.times
    }
}

impl TimeGrid {
    /// `n_points` times `t0 + i h`.
    pub fn uniform(t0: f64, h: f64, n_points: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || !t0.is_finite() {
            return Err(invalid(format!("uniform grid needs finite t0 and h > 0, got t0={t0}, h={h}")));
        }
        if n_points == 0 {
            return Err(invalid("grid needs at least one point"));
        }
        let times = (0..n_points).map(|i| t0 + i as f64 * h).collect();
        Ok(Self { times, step: Some(h) })
    }

    /// Validates ordering and detects uniform spacing.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(invalid("grid needs at least one point"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(invalid("grid times must be finite"));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "grid times must be strictly increasing (index {}: {} then {})",
                i + 1,
                times[i],
                times[i + 1]
            )));
        }
        let step = Self::detect_step(&times).ok();
        Ok(Self { times, step })
    }

    fn detect_step(times: &[f64]) -> Result<f64> {
        if times.len() < 2 {
            return Err(invalid("a single time has no spacing"));
        }
        let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let tol = 1e-12 * h.abs().max(1.0);
        for (i, w) in times.windows(2).enumerate() {
            let d = w[1] - w[0];
            if (d - h).abs() >= tol {
                return Err(Error::NonUniformGrid {
                    index: i + 1,
                    expected: h,
                    found: d,
                });
            }
        }
        Ok(h)
    }

    /// The uniform spacing, or the first offending interval.
    pub fn require_uniform(&self) -> Result<f64> {
        match self.step {
            Some(h) => Ok(h),
            None => Self::detect_step(&self.times),
        }
    }

    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Checks that two grids agree to `1e-9` relative per point.
    pub fn check_matches(&self, other: &TimeGrid) -> Result<()> {
        if self.len() != other.len() {
            return Err(invalid(format!(
                "grid lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (index, (&a, &b)) in self.times.iter().zip(&other.times).enumerate() {
            if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::GridMismatch {
                    index,
                    left: a,
                    right: b,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowUpReason {
    NonFinite,
    StepUnderflow,
    StepLimit,
}

/// Where and why a trajectory stopped being finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlowUp {
    /// First grid index whose state is not trustworthy.
    pub index: usize,
    pub reason: BlowUpReason,
}

/// States aligned with a time grid. After a blow-up every remaining state is NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    dim: usize,
    states: Vec<f64>,
    blow_up: Option<BlowUp>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || states.len() != grid.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} grid points of dimension {dim}",
                states.len(),
                grid.len()
            )));
        }
        let blow_up = states
            .chunks_exact(dim)
            .position(|s| s.iter().any(|v| !v.is_finite()))
            .map(|index| BlowUp {
                index,
                reason: BlowUpReason::NonFinite,
            });
        Ok(Self {
            grid,
            dim,
            states,
            blow_up,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.states
    }

    /// Component `c` at every grid point.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.states().map(|s| s[c]).collect()
    }

    pub fn blow_up(&self) -> Option<BlowUp> {
        self.blow_up
    }

    pub fn is_finite(&self) -> bool {
        self.blow_up.is_none()
    }
}

/// Integration scheme used between consecutive grid times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Forward Euler with `substeps` equal steps per grid interval.
    Euler { substeps: u32 },
    /// Classical RK4 with `substeps` equal steps per grid interval.
    Rk4 { substeps: u32 },
    /// Dormand–Prince 5(4) with absolute and relative tolerance `tol`.
    Rk45 { tol: f64 },
}

impl Method {
    /// Exponent `m` of the per-step error model `σ_ε ≈ h^m`.
    pub fn error_order(&self) -> i32 {
        match self {
            Method::Euler { .. } => 1,
            Method::Rk4 { .. } | Method::Rk45 { .. } => 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Method::Euler { substeps } | Method::Rk4 { substeps } if substeps == 0 => {
                Err(invalid("substeps must be >= 1"))
            }
            Method::Rk45 { tol } if !(tol > 0.0 && tol.is_finite()) => {
                Err(invalid(format!("rk45 tolerance must be positive, got {tol}")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk45 { tol: 1e-8 }
    }
}

/// `u + h f(u)`.
pub fn step_euler<F: VectorField + ?Sized>(field: &F, u: &[f64], h: f64) -> Vec<f64> {
    let mut du = vec![0.0; u.len()];
    field.eval(u, &mut du);
    u.iter().zip(&du).map(|(u, d)| u + h * d).collect()
}

/// One classical fourth-order Runge–Kutta step.
pub fn step_rk4<F: VectorField + ?Sized>(field: &F, u: &[f64], h: f64) -> Vec<f64> {
    let mut out = u.to_vec();
    let mut scratch = Rk4Scratch::new(u.len());
    rk4_in_place(field, &mut out, h, &mut scratch);
    out
}

struct Rk4Scratch {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }
}

fn rk4_in_place<F: VectorField + ?Sized>(field: &F, u: &mut [f64], h: f64, s: &mut Rk4Scratch) {
    let [k1, k2, k3, k4] = &mut s.k;
    let tmp = &mut s.tmp;
    field.eval(u, k1);
    for i in 0..u.len() {
        tmp[i] = u[i] + 0.5 * h * k1[i];
    }
    field.eval(tmp, k2);
    for i in 0..u.len() {
        tmp[i] = u[i] + 0.5 * h * k2[i];
    }
    field.eval(tmp, k3);
    for i in 0..u.len() {
        tmp[i] = u[i] + h * k3[i];
    }
    field.eval(tmp, k4);
    for i in 0..u.len() {
        u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Hard cap on accepted plus rejected adaptive steps per trajectory.
const MAX_ADAPTIVE_STEPS: usize = 5_000_000;

/// Integrates `field` from `u0` at `grid.start()` and records the state at
/// every grid time. The returned grid is the requested one.
///
/// A non-finite state, an adaptive step below `1e-14` of the grid span, or an
/// excessive number of adaptive steps flags the trajectory as blown up and
/// fills the remaining states with NaN.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    u0: &[f64],
    grid: &TimeGrid,
    method: Method,
) -> Result<Trajectory> {
    method.validate()?;
    let n = field.dim();
    if u0.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "initial state has dimension {}, field has {n}",
            u0.len()
        )));
    }
    let times = grid.times();
    let mut states = Vec::with_capacity(times.len() * n);
    states.extend_from_slice(u0);
    let mut u = u0.to_vec();
    let mut blow_up = if u.iter().all(|v| v.is_finite()) {
        None
    } else {
        Some(BlowUp {
            index: 0,
            reason: BlowUpReason::NonFinite,
        })
    };

    let mut stepper = match method {
        Method::Euler { substeps } => Stepper::Euler {
            substeps,
            du: vec![0.0; n],
        },
        Method::Rk4 { substeps } => Stepper::Rk4 {
            substeps,
            scratch: Rk4Scratch::new(n),
        },
        Method::Rk45 { tol } => Stepper::Dopri(Dopri5::new(n, tol, grid.end() - grid.start())),
    };

    for (i, w) in times.windows(2).enumerate() {
        if blow_up.is_some() {
            break;
        }
        match stepper.advance(field, &mut u, w[0], w[1]) {
            Ok(()) if u.iter().all(|v| v.is_finite()) => states.extend_from_slice(&u),
            Ok(()) => {
                blow_up = Some(BlowUp {
                    index: i + 1,
                    reason: BlowUpReason::NonFinite,
                })
            }
            Err(reason) => blow_up = Some(BlowUp { index: i + 1, reason }),
        }
    }
    if let Some(b) = blow_up {
        states.truncate(b.index * n);
        states.resize(times.len() * n, f64::NAN);
    }
    Ok(Trajectory {
        grid: grid.clone(),
        dim: n,
        states,
        blow_up,
    })
}

enum Stepper {
    Euler { substeps: u32, du: Vec<f64> },
    Rk4 { substeps: u32, scratch: Rk4Scratch },
    Dopri(Dopri5),
}

impl Stepper {
    fn advance<F: VectorField + ?Sized>(
        &mut self,
        field: &F,
        u: &mut [f64],
        t0: f64,
        t1: f64,
    ) -> std::result::Result<(), BlowUpReason> {
        match self {
            Stepper::Euler { substeps, du } => {
                let h = (t1 - t0) / f64::from(*substeps);
                for _ in 0..*substeps {
                    field.eval(u, du);
                    for (ui, d) in u.iter_mut().zip(du.iter()) {
                        *ui += h * d;
                    }
                }
                Ok(())
            }
            Stepper::Rk4 { substeps, scratch } => {
                let h = (t1 - t0) / f64::from(*substeps);
                for _ in 0..*substeps {
                    rk4_in_place(field, u, h, scratch);
                }
                Ok(())
            }
            Stepper::Dopri(d) => d.advance(field, u, t0, t1),
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

struct Dopri5 {
    tol: f64,
    min_step: f64,
    /// Proposed size of the next step; `None` until the first step is chosen.
    h: Option<f64>,
    steps: usize,
    k: [Vec<f64>; 7],
    /// `k1` is valid for the current state (first-same-as-last).
    fsal: bool,
    stage: Vec<f64>,
    next: Vec<f64>,
}

impl Dopri5 {
    fn new(n: usize, tol: f64, span: f64) -> Self {
        Self {
            tol,
            min_step: 1e-14 * span.abs().max(f64::MIN_POSITIVE),
            h: None,
            steps: 0,
            k: std::array::from_fn(|_| vec![0.0; n]),
            fsal: false,
            stage: vec![0.0; n],
            next: vec![0.0; n],
        }
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol + self.tol * a.abs().max(b.abs())
    }

    /// Starting step from the local derivative scale.
    fn initial_step<F: VectorField + ?Sized>(&mut self, field: &F, u: &[f64], span: f64) -> f64 {
        let n = u.len() as f64;
        let rms = |v: &mut dyn Iterator<Item = f64>| (v.map(|x| x * x).sum::<f64>() / n).sqrt();
        let k1 = &self.k[0];
        let d0 = rms(&mut u.iter().map(|&x| x / self.scale(x, x)));
        let d1 = rms(&mut u.iter().zip(k1).map(|(&x, &d)| d / self.scale(x, x)));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        for i in 0..u.len() {
            self.stage[i] = u[i] + h0 * k1[i];
        }
        field.eval(&self.stage, &mut self.next);
        let d2 = rms(&mut u
            .iter()
            .zip(&self.next)
            .zip(k1)
            .map(|((&x, &f1), &f0)| (f1 - f0) / self.scale(x, x)))
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        let h = (100.0 * h0).min(h1).min(span);
        if h.is_finite() && h > 0.0 {
            h
        } else {
            span
        }
    }

    fn advance<F: VectorField + ?Sized>(
        &mut self,
        field: &F,
        u: &mut [f64],
        t0: f64,
        t1: f64,
    ) -> std::result::Result<(), BlowUpReason> {
        let n = u.len();
        if !self.fsal {
            field.eval(u, &mut self.k[0]);
            self.fsal = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(field, u, t1 - t0),
        };
        let mut t = t0;
        while t < t1 {
            self.steps += 1;
            if self.steps > MAX_ADAPTIVE_STEPS {
                return Err(BlowUpReason::StepLimit);
            }
            if h < self.min_step || !h.is_finite() {
                return Err(BlowUpReason::StepUnderflow);
            }
            // land exactly on the grid time
            let remaining = t1 - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let step = if last { remaining } else { h };

            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let y = &mut self.stage;
            for i in 0..n {
                y[i] = u[i] + step * A21 * k1[i];
            }
            field.eval(y, k2);
            for i in 0..n {
                y[i] = u[i] + step * (A31 * k1[i] + A32 * k2[i]);
            }
            field.eval(y, k3);
            for i in 0..n {
                y[i] = u[i] + step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            field.eval(y, k4);
            for i in 0..n {
                y[i] = u[i] + step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            field.eval(y, k5);
            for i in 0..n {
                y[i] = u[i]
                    + step * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            field.eval(y, k6);
            let next = &mut self.next;
            for i in 0..n {
                next[i] = u[i]
                    + step * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            field.eval(next, k7);

            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.tol + self.tol * u[i].abs().max(next[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                err = f64::INFINITY;
            }

            if err <= 1.0 {
                u.copy_from_slice(next);
                std::mem::swap(k1, k7);
                t = if last { t1 } else { t + step };
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a clamped final step says nothing about the natural step size
                h = if last { h.max(step * factor) } else { step * factor };
            } else {
                let factor = if err.is_finite() {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                } else {
                    MIN_FACTOR
                };
                h = step * factor;
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

/// Samples the Sprott B system from `u0` at spacing `h` over `[0, t_end]`
/// with the adaptive integrator at tolerance `1e-9`.
pub fn generate_observations(u0: &[f64], t_end: f64, h: f64) -> Result<ObservationSet> {
    generate_observations_with(&SprottB, u0, t_end, h, Method::Rk45 { tol: 1e-9 })
}

/// [`generate_observations`] for an arbitrary field and integrator.
pub fn generate_observations_with<F: VectorField + ?Sized>(
    field: &F,
    u0: &[f64],
    t_end: f64,
    h: f64,
    method: Method,
) -> Result<ObservationSet> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("sample spacing h must be positive, got {h}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("t_end must be positive, got {t_end}")));
    }
    // guard against t_end / h landing just below an integer
    let n = (t_end / h * (1.0 + 1e-12)).floor() as usize + 1;
    let grid = TimeGrid::uniform(0.0, h, n)?;
    let traj = integrate(field, u0, &grid, method)?;
    if let Some(b) = traj.blow_up() {
        return Err(invalid(format!(
            "ground-truth trajectory blew up at t = {} ({:?})",
            grid.times()[b.index],
            b.reason
        )));
    }
    ObservationSet::new(traj)
}
