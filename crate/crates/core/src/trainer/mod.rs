//! Group-relative policy optimisation of the denoising policy.
//!
//! Each training step refreshes the old policy, then for every selected
//! world draws `M` trajectories under it, scores the decoded views, turns
//! the rewards into group-normalised advantages and takes one ascent step
//! of the clipped surrogate per subsampled denoising timestep.

mod checkpoint;
mod objective;

pub use checkpoint::{load_checkpoint, read_run_log, save_checkpoint, TrainerState, CHECKPOINT_FILE, RUN_LOG_FILE, STATE_FILE};
pub use objective::{clipped_objective, compute_advantages, policy_ratio, RatioClamp, LOG_RATIO_CLAMP};

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::policy::{
    couple_inputs, decode_rendered, render_base_views, sample_trajectory, Conditioning, DecodeConfig, DenoiseSchedule,
    DenoiseTrajectory, PolicyParams,
};
use crate::rewards::{score_views, GeometryRewardConfig, RewardBreakdown, RewardWeights};
use crate::seed::{derive_seed, rng_for};
use crate::world::{generate_cameras, generate_world, CameraPath, SharedWorld, ViewObservation, WorldConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    /// Group size `M`.
    pub group_size: usize,
    pub clip_epsilon: f64,
    /// Fraction of denoising steps that receive an update.
    pub timestep_ratio: f64,
    pub learning_rate: f64,
    pub weights: RewardWeights,
    pub steps: usize,
    pub adv_epsilon: f64,
    /// Worlds drawn per training step.
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub weight_decay: f64,
    /// Steps between checkpoints when training into a directory (0: only at the end).
    pub checkpoint_every: usize,
    pub schedule: DenoiseSchedule,
    pub decode: DecodeConfig,
    pub geometry: GeometryRewardConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            group_size: 16,
            clip_epsilon: 0.2,
            timestep_ratio: 0.5,
            learning_rate: 1e-5,
            weights: RewardWeights::default(),
            steps: 200,
            adv_epsilon: 1e-8,
            batch_size: 1,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            weight_decay: 0.0,
            checkpoint_every: 25,
            schedule: DenoiseSchedule::default(),
            decode: DecodeConfig::default(),
            geometry: GeometryRewardConfig::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::GroupTooSmall(self.group_size));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::Config("clip_epsilon must lie in (0, 1)".into()));
        }
        if !(self.timestep_ratio > 0.0 && self.timestep_ratio <= 1.0) {
            return Err(Error::Config("timestep_ratio must lie in (0, 1]".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if !(self.adv_epsilon > 0.0) {
            return Err(Error::Config("adv_epsilon must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(self.adam_epsilon > 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Config("adam_epsilon must be > 0 and weight_decay >= 0".into()));
        }
        self.weights.validate()?;
        self.schedule.validate()?;
        self.decode.validate()?;
        self.geometry.validate()
    }

    /// Number of timesteps updated per group, `⌈τT⌉`.
    pub fn selected_timesteps(&self) -> usize {
        ((self.timestep_ratio * self.schedule.steps() as f64).ceil() as usize).clamp(1, self.schedule.steps())
    }
}

/// A world prepared for training: its cameras, clean renders and conditioning.
#[derive(Debug, Clone)]
pub struct TrainWorld {
    pub id: usize,
    pub world: SharedWorld,
    pub cameras: Vec<CameraPath>,
    pub base_views: Vec<ViewObservation>,
    pub cond: Conditioning,
}

impl TrainWorld {
    /// Renders the cameras once. Group members therefore differ only by
    /// their policy samples.
    pub fn prepare(id: usize, world: SharedWorld, cameras: Vec<CameraPath>, decode: &DecodeConfig, cond_dim: usize) -> Result<Self> {
        let cfg = DecodeConfig {
            render_seed: derive_seed(decode.render_seed, &[world.seed]),
            ..decode.clone()
        };
        let base_views = render_base_views(&world, &cameras, &cfg)?;
        let snapshots: Vec<_> = base_views.iter().map(|v| v.frames[0].clone()).collect();
        let cond = couple_inputs(&snapshots, cameras.len(), cond_dim)?;
        Ok(Self {
            id,
            world,
            cameras,
            base_views,
            cond,
        })
    }
}

/// `count` worlds with seeds derived from `seed`.
pub fn build_dataset(world_cfg: &WorldConfig, decode: &DecodeConfig, count: usize, seed: u64, cond_dim: usize) -> Result<Vec<TrainWorld>> {
    world_cfg.validate()?;
    (0..count)
        .map(|i| {
            let s = derive_seed(seed, &[i as u64]);
            let world = generate_world(world_cfg, s)?;
            let cams = generate_cameras(world_cfg, s)?;
            TrainWorld::prepare(i, world, cams, decode, cond_dim)
        })
        .collect()
}

/// `M` samples for one conditioning with their scores.
#[derive(Debug, Clone)]
pub struct GroupRollout {
    pub trajectories: Vec<DenoiseTrajectory>,
    pub observations: Vec<Vec<ViewObservation>>,
    pub rewards: Vec<f64>,
    pub breakdowns: Vec<RewardBreakdown>,
    pub advantages: Vec<f64>,
    /// Samples whose views could not be scored (reward set to 0).
    pub failures: usize,
}

/// Samples and scores a group under `params`.
pub fn group_rollout(params: &PolicyParams, world: &TrainWorld, cfg: &TrainerConfig, seed: u64) -> Result<GroupRollout> {
    let samples: Vec<Result<(DenoiseTrajectory, Vec<ViewObservation>, Option<RewardBreakdown>)>> = (0..cfg.group_size)
        .into_par_iter()
        .map(|i| {
            let traj = sample_trajectory(params, &world.cond, &cfg.schedule, derive_seed(seed, &[i as u64]))?;
            let views = decode_rendered(&traj.final_latent().z, &world.base_views, cfg.decode.gain)?;
            let score = match score_views(&views, cfg.weights, &cfg.geometry) {
                Ok(b) => Some(b),
                Err(e) if e.is_degenerate() => None,
                Err(e) => return Err(e),
            };
            Ok((traj, views, score))
        })
        .collect();
    let mut out = GroupRollout {
        trajectories: Vec::with_capacity(cfg.group_size),
        observations: Vec::with_capacity(cfg.group_size),
        rewards: Vec::with_capacity(cfg.group_size),
        breakdowns: Vec::with_capacity(cfg.group_size),
        advantages: Vec::new(),
        failures: 0,
    };
    for s in samples {
        let (traj, views, score) = s?;
        let b = score.unwrap_or_else(|| {
            out.failures += 1;
            RewardBreakdown {
                r_g: 0.0,
                r_m: 0.0,
                combined: 0.0,
                d_g: f64::INFINITY,
                d_m: f64::INFINITY,
            }
        });
        out.trajectories.push(traj);
        out.observations.push(views);
        out.rewards.push(b.combined);
        out.breakdowns.push(b);
    }
    out.advantages = compute_advantages(&out.rewards, cfg.adv_epsilon)?;
    Ok(out)
}

/// Adaptive-moment optimiser state with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Updates applied so far.
    pub t: u64,
}

impl AdamW {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Moves `theta` along `grad` (ascent).
    pub fn ascend(&mut self, theta: &mut [f64], grad: &[f64], cfg: &TrainerConfig) {
        self.t += 1;
        let b1t = 1.0 - cfg.beta1.powi(self.t as i32);
        let b2t = 1.0 - cfg.beta2.powi(self.t as i32);
        for k in 0..theta.len() {
            let g = grad[k];
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g;
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[k] / b1t;
            let v_hat = self.v[k] / b2t;
            theta[k] += cfg.learning_rate * (m_hat / (v_hat.sqrt() + cfg.adam_epsilon) - cfg.weight_decay * theta[k]);
        }
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub rg_mean: f64,
    pub rm_mean: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub clamped_ratios: usize,
    pub wall_ms: f64,
}

impl StepRecord {
    /// The record without its wall-clock field, for reproducibility checks.
    pub fn numeric(&self) -> StepRecord {
        StepRecord {
            wall_ms: 0.0,
            ..self.clone()
        }
    }
}

pub type RunLog = Vec<StepRecord>;

/// Policy, optimiser state and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    cfg: TrainerConfig,
    params: PolicyParams,
    opt: AdamW,
    step: usize,
}

impl Trainer {
    pub fn new(params: PolicyParams, cfg: TrainerConfig) -> Result<Self> {
        cfg.validate()?;
        params.dims().validate()?;
        let opt = AdamW::new(params.len());
        Ok(Self {
            cfg,
            params,
            opt,
            step: 0,
        })
    }

    pub fn from_state(state: TrainerState, cfg: TrainerConfig) -> Result<Self> {
        cfg.validate()?;
        if state.opt.m.len() != state.params.len() || state.opt.v.len() != state.params.len() {
            return Err(Error::DimensionMismatch {
                expected: state.params.len(),
                got: state.opt.m.len(),
            });
        }
        Ok(Self {
            cfg,
            params: state.params,
            opt: state.opt,
            step: state.step,
        })
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    /// Steps completed so far.
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> TrainerState {
        TrainerState {
            params: self.params.clone(),
            opt: self.opt.clone(),
            step: self.step,
        }
    }

    pub fn into_params(self) -> PolicyParams {
        self.params
    }

    /// Runs the next training step. Every random choice is drawn from
    /// streams derived from `(seed, step)`, so a restored trainer continues
    /// exactly where the original would have.
    pub fn train_step(&mut self, dataset: &[TrainWorld], seed: u64) -> Result<StepRecord> {
        if dataset.is_empty() {
            return Err(Error::Config("training dataset is empty".into()));
        }
        let started = Instant::now();
        let step = self.step as u64;
        let old = self.params.clone();
        let steps = self.cfg.schedule.steps();

        let batch = self.cfg.batch_size.min(dataset.len());
        let mut picked = sample(&mut rng_for(seed, &[step, 0xBA7C]), dataset.len(), batch).into_vec();
        picked.sort_unstable();

        let mut rewards = Vec::new();
        let (mut rg, mut rm) = (0.0, 0.0);
        let mut objective = 0.0;
        let mut grad_norm = 0.0;
        let mut updates = 0usize;
        let mut clamp = RatioClamp::default();

        for &w in &picked {
            let world = &dataset[w];
            let group_seed = derive_seed(seed, &[step, w as u64]);
            let group = group_rollout(&old, world, &self.cfg, group_seed)?;
            for b in &group.breakdowns {
                rg += b.r_g;
                rm += b.r_m;
            }
            rewards.extend_from_slice(&group.rewards);

            let chosen = sample(&mut rng_for(group_seed, &[0x7153]), steps, self.cfg.selected_timesteps()).into_vec();
            for k in chosen {
                let t = steps - k;
                let (obj, grad) = surrogate_gradient(
                    &self.params,
                    &group.trajectories,
                    &group.advantages,
                    t,
                    &world.cond,
                    self.cfg.clip_epsilon,
                    &mut clamp,
                )?;
                objective += obj;
                updates += 1;
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                grad_norm += norm;
                if norm > 0.0 {
                    self.opt.ascend(self.params.as_mut_slice(), &grad, &self.cfg);
                }
            }
        }
        if self.params.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::AtStep {
                step: self.step + 1,
                source: Box::new(Error::Config("policy parameters became non-finite".into())),
            });
        }
        self.step += 1;
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Ok(StepRecord {
            step: self.step,
            reward_mean: mean,
            reward_std: var.sqrt(),
            rg_mean: rg / n,
            rm_mean: rm / n,
            objective: objective / updates as f64,
            grad_norm: grad_norm / updates as f64,
            clamped_ratios: clamp.events,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Clipped surrogate at denoising time `t` averaged over a group, and its
/// gradient. Ratios are taken against the log-probabilities stored in the
/// trajectories, i.e. against the policy that sampled them.
pub fn surrogate_gradient(
    params: &PolicyParams,
    trajectories: &[DenoiseTrajectory],
    advantages: &[f64],
    t: usize,
    cond: &Conditioning,
    clip_epsilon: f64,
    clamp: &mut RatioClamp,
) -> Result<(f64, Vec<f64>)> {
    if trajectories.len() != advantages.len() || trajectories.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: trajectories.len(),
            got: advantages.len(),
        });
    }
    params.check_cond(cond)?;
    let m = trajectories.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut g_i = vec![0.0; params.len()];
    let mut obj = 0.0;
    for (traj, &a) in trajectories.iter().zip(advantages) {
        let steps = traj.steps();
        if t == 0 || t > steps {
            return Err(Error::Config(format!("timestep {t} outside 1..={steps}")));
        }
        let tr = traj.transition(t);
        g_i.iter_mut().for_each(|g| *g = 0.0);
        let logp = params.log_prob_grad_into(&tr, steps, cond, 1.0, &mut g_i);
        let rho = clamp.ratio(logp - traj.logps[steps - t]);
        obj += clipped_objective(rho, a, clip_epsilon) / m;
        if unclipped_active(rho, a, clip_epsilon) {
            let s = a * rho / m;
            for (g, gi) in grad.iter_mut().zip(&g_i) {
                *g += s * gi;
            }
        }
    }
    Ok((obj, grad))
}

/// Whether the unclipped term attains the minimum, i.e. carries gradient.
fn unclipped_active(rho: f64, a: f64, eps: f64) -> bool {
    rho * a <= rho.clamp(1.0 - eps, 1.0 + eps) * a
}

/// Trains in memory for `cfg.steps` steps.
pub fn train(params: PolicyParams, dataset: &[TrainWorld], cfg: &TrainerConfig, seed: u64) -> Result<(PolicyParams, RunLog)> {
    let mut trainer = Trainer::new(params, cfg.clone())?;
    let mut log = Vec::with_capacity(cfg.steps);
    while trainer.step_index() < cfg.steps {
        log.push(trainer.train_step(dataset, seed)?);
    }
    Ok((trainer.into_params(), log))
}

/// Trains with the run log appended to `dir` after every step and
/// checkpoints every `cfg.checkpoint_every` steps and at the end. With
/// `resume`, continues from the checkpoint in `dir`, dropping log lines
/// written after it.
pub fn train_in_dir(
    params: PolicyParams,
    dataset: &[TrainWorld],
    cfg: &TrainerConfig,
    seed: u64,
    dir: &Path,
    resume: bool,
) -> Result<(PolicyParams, RunLog)> {
    let log_path = dir.join(RUN_LOG_FILE);
    let (mut trainer, mut log) = if resume && dir.join(STATE_FILE).exists() {
        let state = load_checkpoint(dir, seed)?;
        let step = state.step;
        let mut log = read_run_log(&log_path)?;
        log.retain(|r| r.step <= step);
        if log.len() != step {
            return Err(Error::format(&log_path, format!("run log has {} records, checkpoint is at step {step}", log.len())));
        }
        (Trainer::from_state(state, cfg.clone())?, log)
    } else {
        (Trainer::new(params, cfg.clone())?, Vec::new())
    };
    rewrite_log(&log_path, &log)?;
    let mut file = OpenOptions::new()
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    while trainer.step_index() < cfg.steps {
        let record = trainer
            .train_step(dataset, seed)
            .map_err(|e| at_step(e, trainer.step_index() + 1))?;
        let line = serde_json::to_string(&record).map_err(|e| Error::format(&log_path, e.to_string()))?;
        writeln!(file, "{line}")
            .and_then(|_| file.flush())
            .map_err(|e| at_step(Error::io(&log_path, e), record.step))?;
        log.push(record);
        let s = trainer.step_index();
        if (cfg.checkpoint_every > 0 && s % cfg.checkpoint_every == 0) || s == cfg.steps {
            save_checkpoint(dir, &trainer.state(), cfg, seed).map_err(|e| at_step(e, s))?;
        }
    }
    Ok((trainer.into_params(), log))
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::AtStep { .. } => e,
        other => Error::AtStep {
            step,
            source: Box::new(other),
        },
    }
}

fn rewrite_log(path: &Path, log: &[StepRecord]) -> Result<()> {
    let mut text = String::new();
    for r in log {
        text.push_str(&serde_json::to_string(r).map_err(|e| Error::format(path, e.to_string()))?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
