use crate::policy::{log_prob, Conditioning, PolicyParams, Transition};
use crate::{Error, Result};

/// Bound on `|log π_θ − log π_old|` before exponentiation.
pub const LOG_RATIO_CLAMP: f64 = 30.0;

/// Group-normalised advantages `(r_i − mean) / max(std, adv_epsilon)` with
/// the population standard deviation. A group of identical rewards gets
/// exact zeros.
pub fn compute_advantages(rewards: &[f64], adv_epsilon: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall(rewards.len()));
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt();
    let denom = std.max(adv_epsilon);
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// `min(ρA, clip(ρ, 1−ε, 1+ε)A)`.
pub fn clipped_objective(rho: f64, a: f64, eps: f64) -> f64 {
    (rho * a).min(rho.clamp(1.0 - eps, 1.0 + eps) * a)
}

/// Exponentiates log-ratios, clamping them to `±LOG_RATIO_CLAMP` and
/// counting how often that happened.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RatioClamp {
    pub events: usize,
}

impl RatioClamp {
    pub fn ratio(&mut self, log_ratio: f64) -> f64 {
        if log_ratio.abs() > LOG_RATIO_CLAMP {
            self.events += 1;
        }
        log_ratio.clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP).exp()
    }
}

/// `π_θ(z_{t−1} | z_t) / π_old(z_{t−1} | z_t)`.
pub fn policy_ratio(
    params: &PolicyParams,
    old: &PolicyParams,
    tr: &Transition,
    steps: usize,
    cond: &Conditioning,
    clamp: &mut RatioClamp,
) -> f64 {
    clamp.ratio(log_prob(params, tr, steps, cond) - log_prob(old, tr, steps, cond))
}
