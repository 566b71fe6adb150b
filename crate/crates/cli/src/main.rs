//! `dropout-ode`: simulate, train, predict and evaluate from the command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 too few finite trajectories.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dropout_ode::checkpoint::Checkpoint;
use dropout_ode::io;
use dropout_ode::ode::generate_observations;
use dropout_ode::polykernel::DropoutRate;
use dropout_ode::predictor::{predict_envelope, MaskMode};
use dropout_ode::trainer::{estimate_derivatives, train_on_derivatives, ObservationSet, TrainSeeds};
use dropout_ode::Error;
use serde::Serialize;

use config::{overlay, ExperimentConfig, PREDICT_INTERVALS, PREDICT_U0, SIMULATE_U0, T_END};

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => 1,
            Error::InsufficientTrajectories { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(name = "dropout-ode", version, about = "Bayesian ODE inverse problems with MC dropout")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the Sprott B system on a uniform grid and write a trajectory CSV.
    Simulate(SimulateArgs),
    /// Fit a dropout network to a trajectory CSV.
    Train(TrainArgs),
    /// Sample dropout trajectories from a checkpoint and write the envelope.
    Predict(PredictArgs),
    /// Score an envelope against a reference trajectory.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for outputs without an explicit path.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Initial state, comma separated [default: 1,1,1]
    #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
    u0: Option<State>,
    /// Final time [default: 10]
    #[arg(long, value_parser = positive)]
    t_end: Option<f64>,
    /// Sample spacing [default: 0.002]
    #[arg(long, value_parser = positive)]
    h: Option<f64>,
    /// Output CSV [default: <out-dir>/train.csv]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Trajectory CSV with a uniform time grid [default: <out-dir>/train.csv]
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dropout rate in [0, 1) [default: 0.25]
    #[arg(long, value_parser = rate)]
    r: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    phase1_steps: Option<usize>,
    #[arg(long, value_parser = positive)]
    phase1_lr: Option<f64>,
    #[arg(long)]
    phase2_steps: Option<usize>,
    #[arg(long, value_parser = positive)]
    phase2_lr: Option<f64>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// Hadamard power order; 1 squares the hidden layer.
    #[arg(long)]
    kernel_order: Option<u32>,
    /// [default: <out-dir>/checkpoint.json]
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Per-iteration loss log [default: <out-dir>/loss.csv]
    #[arg(long)]
    loss: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// [default: <out-dir>/checkpoint.json]
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Initial state, comma separated [default: -1,-1,-1]
    #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
    u0: Option<State>,
    /// [default: 0]
    #[arg(long)]
    t_start: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of grid intervals [default: 1000]
    #[arg(long)]
    n: Option<usize>,
    /// Finite trajectories to retain [default: 1000]
    #[arg(long)]
    m_traj: Option<usize>,
    /// Confidence multiplier [default: 1.96]
    #[arg(long, value_parser = positive)]
    c: Option<f64>,
    /// Dropout rate at prediction time [default: the checkpoint's]
    #[arg(long, value_parser = rate)]
    r: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: all cores]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Sampling cap [default: 10 × m-traj]
    #[arg(long)]
    max_attempts: Option<usize>,
    /// Integration error term h^order added to the std [default: 4]
    #[arg(long, conflicts_with = "no_sigma_eps")]
    sigma_eps_order: Option<i32>,
    /// Leave the integration error term out of the bands.
    #[arg(long)]
    no_sigma_eps: bool,
    /// Draw a new mask at every right-hand-side evaluation.
    #[arg(long)]
    per_evaluation_masks: bool,
    /// Expected hidden width; must match the checkpoint.
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// Expected kernel order; must match the checkpoint.
    #[arg(long)]
    kernel_order: Option<u32>,
    /// [default: <out-dir>/envelope.csv]
    #[arg(long)]
    out: Option<PathBuf>,
    /// [default: envelope path with a .json extension]
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// [default: <out-dir>/envelope.csv]
    #[arg(long)]
    envelope: Option<PathBuf>,
    /// Reference trajectory CSV on the same grid.
    #[arg(long)]
    reference: PathBuf,
    /// Component name (x, y, z) or zero-based index.
    #[arg(long, default_value = "x")]
    component: String,
    /// [default: <out-dir>/coverage.json]
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Comma-separated state vector.
#[derive(Debug, Clone)]
struct State(Vec<f64>);

fn parse_state(s: &str) -> Result<State, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("cannot parse {p:?} as a number")))
        .collect::<Result<_, _>>()?;
    if v.iter().all(|x| x.is_finite()) {
        Ok(State(v))
    } else {
        Err("state components must be finite".into())
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn rate(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if (0.0..1.0).contains(&x) => Ok(x),
        _ => Err(format!("dropout rate must lie in [0, 1), got {s:?}")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref())?;
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn output(explicit: Option<PathBuf>, cfg: &ExperimentConfig, name: &str) -> Result<PathBuf, Failure> {
    match explicit {
        Some(p) => Ok(p),
        None => {
            let dir = cfg.out_dir();
            std::fs::create_dir_all(&dir)
                .map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
            Ok(dir.join(name))
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = load(&a.common)?;
    overlay!(cfg, a; t_end, h);
    if let Some(State(u0)) = a.u0 {
        cfg.u0 = Some(u0);
    }
    let u0 = cfg.u0.clone().unwrap_or(SIMULATE_U0.to_vec());
    if u0.len() != 3 {
        return Err(Failure::usage(format!("the Sprott B state has 3 components, got {}", u0.len())));
    }
    let t_end = cfg.t_end.unwrap_or(T_END);
    let h = cfg.h.unwrap_or(cfg.training().h);
    let obs = generate_observations(&u0, t_end, h)?;
    let path = output(a.out, &cfg, "train.csv")?;
    io::write_trajectory_csv(&path, obs.trajectory())?;
    println!(
        "wrote {} points on [{}, {}] with h = {} to {}",
        obs.len(),
        obs.grid().start(),
        obs.grid().end(),
        obs.h(),
        path.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), Failure> {
    let mut cfg = load(&a.common)?;
    overlay!(cfg, a; r, seed, outer_iters, phase1_steps, phase1_lr, phase2_steps, phase2_lr, hidden_dim, kernel_order);
    let tc = cfg.training();
    let rate = tc.rate()?;
    let schedule = tc.schedule();
    schedule.validate()?;

    let data = a.data.unwrap_or_else(|| cfg.out_dir().join("train.csv"));
    let obs = ObservationSet::new(io::read_trajectory_csv(&data)?)?;
    let shape = tc.shape(obs.trajectory().dim())?;
    let set = estimate_derivatives(&obs)?;
    let report_every = (schedule.outer_iters / 10).max(1);
    let outcome = train_on_derivatives(shape, &set, rate, &schedule, TrainSeeds::from(tc.seed), |e| {
        if (e.iter + 1) % report_every == 0 {
            eprintln!("iteration {:>5}  loss {:.6e}", e.iter + 1, e.loss);
        }
    })?;

    let ckpt_path = output(a.checkpoint, &cfg, "checkpoint.json")?;
    let loss_path = output(a.loss, &cfg, "loss.csv")?;
    let ckpt = Checkpoint::new(&outcome.weights, tc.seed, rate.value(), obs.h());
    write_text(&ckpt_path, &ckpt.to_json()?)?;
    io::write_loss_csv(&loss_path, &outcome.log)?;
    let last = outcome.log.last().map_or(f64::NAN, |e| e.loss);
    println!("final loss {last:.6e}; checkpoint {}", ckpt_path.display());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, format!("{text}\n")).map_err(|source| {
        Failure::from(Error::Io {
            path: path.to_owned(),
            source,
        })
    })
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Checkpoint::from_json(&text).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn predict(a: PredictArgs) -> Result<(), Failure> {
    let mut cfg = load(&a.common)?;
    if let Some(State(u0)) = a.u0.clone() {
        cfg.u0 = Some(u0);
    }
    overlay!(cfg, a; t_start, t_end, n, m_traj, r, seed, max_attempts, hidden_dim, kernel_order);
    if let Some(c) = a.c {
        cfg.c_conf = Some(c);
    }
    if let Some(t) = a.threads {
        cfg.threads = Some(t as usize);
    }
    if let Some(m) = a.sigma_eps_order {
        cfg.sigma_eps_exponent = Some(m);
    }
    if a.per_evaluation_masks {
        cfg.mask_mode = Some(MaskMode::PerEvaluation);
    }

    let ckpt_path = a.checkpoint.unwrap_or_else(|| cfg.out_dir().join("checkpoint.json"));
    let ckpt = read_checkpoint(&ckpt_path)?;
    let weights = ckpt.weights()?;
    let shape = weights.shape();
    for (name, want, have) in [
        ("hidden_dim", cfg.hidden_dim, shape.hidden_dim),
        ("kernel_order", cfg.kernel_order.map(|k| k as usize), shape.kernel_order as usize),
    ] {
        if want.is_some_and(|w| w != have) {
            return Err(Error::ShapeMismatch(format!(
                "requested {name} = {}, checkpoint has {have}",
                want.unwrap_or_default()
            ))
            .into());
        }
    }
    let rate = DropoutRate::new(cfg.r.unwrap_or(ckpt.metadata.dropout_rate))?;
    let u0 = cfg.u0.clone().unwrap_or(PREDICT_U0.to_vec());
    if u0.len() != shape.input_dim {
        return Err(Failure::usage(format!(
            "--u0 has {} components, the network expects {}",
            u0.len(),
            shape.input_dim
        )));
    }
    let mut env_cfg = cfg.envelope();
    if a.no_sigma_eps {
        env_cfg.sigma_eps_exponent = None;
    }
    let seed = cfg.seed.unwrap_or(0);
    let env = predict_envelope(
        &weights,
        rate,
        &u0,
        cfg.t_start.unwrap_or(0.0),
        cfg.t_end.unwrap_or(T_END),
        cfg.n.unwrap_or(PREDICT_INTERVALS),
        &env_cfg,
        seed,
    )?;

    let out = output(a.out, &cfg, "envelope.csv")?;
    let meta = a.meta.unwrap_or_else(|| out.with_extension("json"));
    io::write_envelope_csv(&out, &env)?;
    io::write_json(&meta, &env.meta(seed))?;
    println!(
        "retained {} discarded {}; envelope {}",
        env.retained,
        env.discarded,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CoverageReport {
    coverage_fraction: f64,
    mean_band_width: f64,
    horizon_of_first_miss: Option<f64>,
}

fn component_index(name: &str, dim: usize) -> Result<usize, Failure> {
    let idx = io::component_names(dim)
        .iter()
        .position(|c| c == name)
        .or_else(|| name.parse().ok())
        .ok_or_else(|| Failure::usage(format!("unknown component {name:?}")))?;
    if idx >= dim {
        return Err(Failure::usage(format!("component {idx} out of range for dimension {dim}")));
    }
    Ok(idx)
}

fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let cfg = load(&a.common)?;
    let env_path = a.envelope.unwrap_or_else(|| cfg.out_dir().join("envelope.csv"));
    let bands = io::read_envelope_csv(&env_path)?;
    let reference = io::read_trajectory_csv(&a.reference)?;
    if reference.dim() != bands.dim {
        return Err(Error::ShapeMismatch(format!(
            "envelope has {} components, reference has {}",
            bands.dim,
            reference.dim()
        ))
        .into());
    }
    let c = component_index(&a.component, bands.dim)?;
    let report = CoverageReport {
        coverage_fraction: bands.coverage(&reference, c)?,
        mean_band_width: bands.mean_band_width(c, bands.grid.start(), bands.grid.end())?,
        horizon_of_first_miss: bands.first_miss(&reference, c)?,
    };
    let out = output(a.out, &cfg, "coverage.json")?;
    io::write_json(&out, &report)?;
    println!("{}", serde_json::to_string(&report).expect("plain struct"));
    Ok(())
}
