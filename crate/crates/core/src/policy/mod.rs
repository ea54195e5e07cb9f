//! Toy stochastic denoising policy.
//!
//! Each denoising step is a Gaussian transition
//! `z_{t−1} ~ Normal(μ_θ(z_t, t, c), σ_t² I)` where `μ_θ` is a two-layer tanh
//! perceptron over the grid latent, a sinusoidal timestep embedding and the
//! conditioning vector. The grid latent holds one slice of width `d_v` per
//! view; decoding turns each slice into a rigid misalignment and a motion
//! skew applied to that view's rendering.

mod checkpoint;
mod decode;
mod mlp;

pub use checkpoint::{load_params, read_params, save_params, write_params, CheckpointMeta, PARAMS_MAGIC};
pub use decode::{decode, decode_rendered, render_base_views, DecodeConfig, VIEW_WIDTH};
pub use mlp::{time_embedding, PolicyDims, PolicyParams};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::seed::rng_for;
use crate::{Error, PointCloudd, Result};

/// Conditioning vector standing in for the prompt and coupled input images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditioning(pub Vec<f64>);

impl Conditioning {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Grid latent at denoising time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub z: Vec<f64>,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseSchedule {
    pub sigmas: Vec<f64>,
}

impl DenoiseSchedule {
    pub fn constant(steps: usize, sigma: f64) -> Self {
        Self {
            sigmas: vec![sigma; steps],
        }
    }

    pub fn steps(&self) -> usize {
        self.sigmas.len()
    }

    /// Transition std of the step leaving time `t` (1-based).
    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t - 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::Config("schedule needs at least one step".into()));
        }
        if self.sigmas.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config("schedule sigmas must be positive".into()));
        }
        Ok(())
    }
}

impl Default for DenoiseSchedule {
    fn default() -> Self {
        Self::constant(4, 0.3)
    }
}

/// One stored transition `z_t → z_{t−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: usize,
    pub z_t: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub sigma: f64,
}

/// A sampled chain `z_T … z_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseTrajectory {
    /// `states[k]` is `z_{T−k}`.
    pub states: Vec<Vec<f64>>,
    /// `means[k]` is the predicted mean of the step leaving `z_{T−k}`.
    pub means: Vec<Vec<f64>>,
    pub logps: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl DenoiseTrajectory {
    pub fn steps(&self) -> usize {
        self.logps.len()
    }

    /// Transition leaving time `t` (1-based, `t = T` is the first step).
    pub fn transition(&self, t: usize) -> Transition {
        let k = self.steps() - t;
        Transition {
            t,
            z_t: self.states[k].clone(),
            z_prev: self.states[k + 1].clone(),
            sigma: self.sigmas[k],
        }
    }

    pub fn final_latent(&self) -> LatentState {
        LatentState {
            z: self.states.last().expect("non-empty trajectory").clone(),
            t: 0,
        }
    }
}

/// Log-density of `x` under `Normal(mean, σ² I)`.
pub fn gaussian_log_prob(x: &[f64], mean: &[f64], sigma: f64) -> f64 {
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let d = x.len() as f64;
    -0.5 * sq / (sigma * sigma) - 0.5 * d * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
}

/// Builds the conditioning vector from the `N` first-frame snapshots.
///
/// The snapshots are hashed into a seed for a standard-normal embedding of
/// dimension `dim`, so identical inputs give identical vectors.
pub fn couple_inputs(snapshots: &[PointCloudd], views: usize, dim: usize) -> Result<Conditioning> {
    if snapshots.len() != views {
        return Err(Error::WrongViewCount {
            expected: views,
            got: snapshots.len(),
        });
    }
    let mut hasher = Sha256::new();
    for (k, s) in snapshots.iter().enumerate() {
        hasher.update((k as u64).to_le_bytes());
        hasher.update((s.len() as u64).to_le_bytes());
        for (p, c) in s.iter() {
            for v in [p.x, p.y, p.z, c] {
                hasher.update(v.to_le_bytes());
            }
        }
    }
    let digest = hasher.finalize();
    let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    let mut rng = rng_for(seed, &[0xC0_4E]);
    Ok(Conditioning((0..dim).map(|_| rng.sample(StandardNormal)).collect()))
}

/// Samples `z_T ~ Normal(0, I)` and runs the chain down to `z_0`.
pub fn sample_trajectory(
    params: &PolicyParams,
    cond: &Conditioning,
    sched: &DenoiseSchedule,
    seed: u64,
) -> Result<DenoiseTrajectory> {
    params.check_cond(cond)?;
    let dim = params.dims().latent_dim();
    let mut rng = rng_for(seed, &[0x5A_4D50]);
    let mut z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let steps = sched.steps();
    let mut states = Vec::with_capacity(steps + 1);
    let mut means = Vec::with_capacity(steps);
    let mut logps = Vec::with_capacity(steps);
    states.push(z.clone());
    for t in (1..=steps).rev() {
        let sigma = sched.sigma(t);
        let mean = params.mean(&z, t, steps, cond);
        let next: Vec<f64> = mean
            .iter()
            .map(|&m| m + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        logps.push(gaussian_log_prob(&next, &mean, sigma));
        means.push(mean);
        states.push(next.clone());
        z = next;
    }
    Ok(DenoiseTrajectory {
        states,
        means,
        logps,
        sigmas: (1..=steps).rev().map(|t| sched.sigma(t)).collect(),
    })
}

/// Log-probability of a transition and its gradient over the flat
/// parameter vector.
pub fn log_prob_and_grad(
    params: &PolicyParams,
    tr: &Transition,
    steps: usize,
    cond: &Conditioning,
) -> Result<(f64, Vec<f64>)> {
    params.check_cond(cond)?;
    let dim = params.dims().latent_dim();
    for len in [tr.z_t.len(), tr.z_prev.len()] {
        if len != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: len,
            });
        }
    }
    let mut grad = vec![0.0; params.len()];
    let logp = params.log_prob_grad_into(tr, steps, cond, 1.0, &mut grad);
    Ok((logp, grad))
}

pub fn log_prob(params: &PolicyParams, tr: &Transition, steps: usize, cond: &Conditioning) -> f64 {
    let mean = params.mean(&tr.z_t, tr.t, steps, cond);
    gaussian_log_prob(&tr.z_prev, &mean, tr.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (PolicyParams, Conditioning) {
        let dims = PolicyDims::default();
        let params = PolicyParams::init(dims, 3);
        let cond = Conditioning((0..dims.cond_dim).map(|i| (i as f64 * 0.37).sin()).collect());
        (params, cond)
    }

    #[test]
    fn stored_logps_recompute() {
        let (params, cond) = setup();
        let sched = DenoiseSchedule::default();
        let traj = sample_trajectory(&params, &cond, &sched, 5).unwrap();
        assert_eq!(traj.states.len(), 5);
        for t in 1..=4 {
            let tr = traj.transition(t);
            let k = 4 - t;
            let re = log_prob(&params, &tr, 4, &cond);
            assert!((re - traj.logps[k]).abs() <= 1e-12 * re.abs().max(1.0));
        }
        assert_eq!(traj, sample_trajectory(&params, &cond, &sched, 5).unwrap());
        assert_ne!(traj, sample_trajectory(&params, &cond, &sched, 6).unwrap());
    }

    #[test]
    fn vanishing_noise_follows_mean() {
        let (params, cond) = setup();
        let sched = DenoiseSchedule::constant(4, 1e-12);
        let traj = sample_trajectory(&params, &cond, &sched, 1).unwrap();
        for k in 0..4 {
            for (a, b) in traj.states[k + 1].iter().zip(&traj.means[k]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_density() {
        let x = [0.5, -0.25];
        let m = [0.0, 0.0];
        let s: f64 = 0.3;
        let expected = -0.5 * (0.25 + 0.0625) / (s * s) - (2.0 * std::f64::consts::PI * s * s).ln();
        assert!((gaussian_log_prob(&x, &m, s) - expected).abs() < 1e-14);
    }

    #[test]
    fn coupling_is_deterministic_and_checks_count() {
        let a = PointCloudd::from_points(vec![crate::Point3d::new(1.0, 2.0, 3.0)]).unwrap();
        let b = PointCloudd::from_points(vec![crate::Point3d::new(1.0, 2.0, 3.5)]).unwrap();
        let c1 = couple_inputs(&[a.clone(), b.clone()], 2, 8).unwrap();
        assert_eq!(c1, couple_inputs(&[a.clone(), b.clone()], 2, 8).unwrap());
        assert_ne!(c1, couple_inputs(&[b.clone(), a.clone()], 2, 8).unwrap());
        assert!(matches!(
            couple_inputs(&[a], 2, 8),
            Err(Error::WrongViewCount { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn gradient_vanishes_at_the_mean() {
        let (params, cond) = setup();
        let z_t: Vec<f64> = (0..14).map(|i| (i as f64).cos()).collect();
        let mean = params.mean(&z_t, 2, 4, &cond);
        let tr = Transition {
            t: 2,
            z_t,
            z_prev: mean,
            sigma: 0.3,
        };
        let (_, g) = log_prob_and_grad(&params, &tr, 4, &cond).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_checks() {
        let (params, cond) = setup();
        let tr = Transition {
            t: 1,
            z_t: vec![0.0; 3],
            z_prev: vec![0.0; 14],
            sigma: 0.3,
        };
        assert!(log_prob_and_grad(&params, &tr, 4, &cond).is_err());
        let short = Conditioning(vec![0.0; 2]);
        assert!(sample_trajectory(&params, &short, &DenoiseSchedule::default(), 0).is_err());
    }
}
