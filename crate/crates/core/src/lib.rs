//! Learning autonomous ODE vector fields from sampled trajectories with a
//! dropout-regularised polynomial kernel network, and forecasting with
//! Monte-Carlo dropout confidence envelopes.
//!
//! The pipeline is:
//!
//! 1. [`ode::generate_observations`] samples a reference system on a uniform grid.
//! 2. [`trainer::train`] fits a [`polykernel::WeightSet`] to finite-difference
//!    derivative targets, with a fresh dropout mask at every optimiser step.
//! 3. [`predictor::predict_envelope`] integrates the network under many
//!    sampled masks, discards trajectories that blow up, and reports
//!    `mean ± c · std` bands.
//!
//! ```no_run
//! use dropout_ode::ode::generate_observations;
//! use dropout_ode::{predict_envelope, train, DropoutRate, EnvelopeConfig, NetworkShape, TrainingSchedule};
//!
//! let obs = generate_observations(&[1.0, 1.0, 1.0], 10.0, 1.0 / 500.0)?;
//! let rate = DropoutRate::new(0.25)?;
//! let fit = train(NetworkShape::sprott_default(), &obs, rate, &TrainingSchedule::default(), 0u64)?;
//! let env = predict_envelope(&fit.weights, rate, &[-1.0, -1.0, -1.0], 0.0, 10.0, 1000, &EnvelopeConfig::default(), 0)?;
//! println!("retained {} discarded {}", env.retained, env.discarded);
//! # Ok::<(), dropout_ode::Error>(())
//! ```

pub mod checkpoint;
pub mod error;
pub mod io;
pub mod ode;
pub mod polykernel;
pub mod predictor;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use ode::{integrate, Method, SprottB, TimeGrid, Trajectory, VectorField};
pub use polykernel::{Batch, DropoutMask, DropoutRate, NetworkShape, WeightSet};
pub use predictor::{predict_envelope, EnvelopeConfig, TrajectoryEnvelope};
pub use trainer::{train, ObservationSet, TrainingSchedule};
