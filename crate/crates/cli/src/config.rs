//! Experiment configuration: command-line flags override the JSON config
//! file, which overrides the built-in defaults.

use std::path::{Path, PathBuf};

use dropout_ode::ode::Method;
use dropout_ode::predictor::{EnvelopeConfig, MaskMode};
use dropout_ode::trainer::TrainingConfig;
use serde::Deserialize;

use crate::Failure;

/// Every field is optional; unset fields fall back to the defaults below.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub u0: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub h: Option<f64>,
    pub out_dir: Option<PathBuf>,

    pub r: Option<f64>,
    pub outer_iters: Option<usize>,
    pub phase1_steps: Option<usize>,
    pub phase1_lr: Option<f64>,
    pub phase2_steps: Option<usize>,
    pub phase2_lr: Option<f64>,
    pub seed: Option<u64>,
    pub hidden_dim: Option<usize>,
    pub kernel_order: Option<u32>,

    pub t_start: Option<f64>,
    pub n: Option<usize>,
    pub m_traj: Option<usize>,
    pub c_conf: Option<f64>,
    pub sigma_eps_exponent: Option<i32>,
    pub method: Option<Method>,
    pub max_attempts: Option<usize>,
    pub mask_mode: Option<MaskMode>,
    pub threads: Option<usize>,
}

pub const SIMULATE_U0: [f64; 3] = [1.0, 1.0, 1.0];
pub const PREDICT_U0: [f64; 3] = [-1.0, -1.0, -1.0];
pub const T_END: f64 = 10.0;
pub const PREDICT_INTERVALS: usize = 1000;

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        match path {
            None => Ok(Self::default()),
            Some(p) => dropout_ode::io::read_json(p).map_err(|e| Failure {
                code: 1,
                message: format!("config: {e}"),
            }),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn training(&self) -> TrainingConfig {
        let d = TrainingConfig::default();
        TrainingConfig {
            h: self.h.unwrap_or(d.h),
            r: self.r.unwrap_or(d.r),
            outer_iters: self.outer_iters.unwrap_or(d.outer_iters),
            phase1_steps: self.phase1_steps.unwrap_or(d.phase1_steps),
            phase1_lr: self.phase1_lr.unwrap_or(d.phase1_lr),
            phase2_steps: self.phase2_steps.unwrap_or(d.phase2_steps),
            phase2_lr: self.phase2_lr.unwrap_or(d.phase2_lr),
            seed: self.seed.unwrap_or(d.seed),
            hidden_dim: self.hidden_dim.unwrap_or(d.hidden_dim),
            kernel_order: self.kernel_order.unwrap_or(d.kernel_order),
        }
    }

    pub fn envelope(&self) -> EnvelopeConfig {
        let d = EnvelopeConfig::default();
        EnvelopeConfig {
            trajectories: self.m_traj.unwrap_or(d.trajectories),
            c_conf: self.c_conf.unwrap_or(d.c_conf),
            sigma_eps_exponent: self.sigma_eps_exponent.or(d.sigma_eps_exponent),
            method: self.method.unwrap_or(d.method),
            max_attempts: self.max_attempts.or(d.max_attempts),
            mask_mode: self.mask_mode.unwrap_or(d.mask_mode),
            threads: self.threads,
        }
    }
}

/// `Some` flag values replace the corresponding config values.
macro_rules! overlay {
    ($cfg:expr, $flags:expr; $($field:ident),+ $(,)?) => {
        $( if let Some(v) = $flags.$field.clone() { $cfg.$field = Some(v); } )+
    };
}
pub(crate) use overlay;
