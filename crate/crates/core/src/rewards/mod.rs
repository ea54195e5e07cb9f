//! Geometry and motion consistency rewards.
//!
//! Geometry: confidence-filter each view's aggregated cloud, register view 1
//! onto view 2, take the symmetric Chamfer distance `d_g` and score
//! `r_g = exp(−d_g)`. Motion: carry view 1's tracks into view 2's camera
//! with the known extrinsics, match tracks by temporal average, average the
//! point distances into `d_m` and score `r_m = exp(−d_m)`.

mod chamfer;
mod motion;
mod registration;

pub use chamfer::{chamfer_distance, directed};
pub use motion::{align_tracks, match_tracks, motion_distance, motion_reward, track_distance};
pub use registration::{register_clouds, Registration};

use serde::{Deserialize, Serialize};

use crate::world::ViewObservation;
use crate::{Error, PointCloudd, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryRewardConfig {
    pub confidence_threshold: f64,
    pub icp_max_iters: usize,
    pub icp_tolerance: f64,
    pub trim_fraction: f64,
    /// Centroid-aligned ICP starts in addition to the given pose.
    pub restarts: usize,
    pub restart_angle_deg: f64,
    /// Source points used to rank the starts (0 keeps all).
    pub coarse_points: usize,
    /// Source points used for the final refinement (0 keeps all).
    pub max_registration_points: usize,
    pub seed: u64,
}

impl Default for GeometryRewardConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.1,
            icp_max_iters: 50,
            icp_tolerance: 1e-6,
            trim_fraction: 0.2,
            restarts: 4,
            restart_angle_deg: 30.0,
            coarse_points: 100,
            max_registration_points: 300,
            seed: 0,
        }
    }
}

impl GeometryRewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::Config("confidence_threshold must lie in [0, 1]".into()));
        }
        if self.icp_max_iters == 0 {
            return Err(Error::Config("icp_max_iters must be >= 1".into()));
        }
        if !(self.icp_tolerance > 0.0) {
            return Err(Error::Config("icp_tolerance must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(Error::Config("trim_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn with_threshold(&self, level: f64) -> Self {
        Self {
            confidence_threshold: level,
            ..self.clone()
        }
    }
}

/// Reward scales `λ_g`, `λ_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub geometry: f64,
    pub motion: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            geometry: 0.5,
            motion: 0.5,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.geometry >= 0.0 && self.motion >= 0.0) {
            return Err(Error::Config("reward weights must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_g: f64,
    pub r_m: f64,
    pub combined: f64,
    pub d_g: f64,
    pub d_m: f64,
}

impl RewardBreakdown {
    pub fn from_distances(d_g: f64, d_m: f64, w: RewardWeights) -> Self {
        let r_g = (-d_g).exp();
        let r_m = (-d_m).exp();
        Self {
            r_g,
            r_m,
            combined: w.geometry * r_g + w.motion * r_m,
            d_g,
            d_m,
        }
    }
}

/// Confidence-filtered union of a view's frames.
pub fn view_cloud(view: &ViewObservation, level: f64) -> PointCloudd {
    view.aggregate_cloud().filter_confidence(level)
}

/// Geometry reward of a view pair. Returns `(r_g, d_g)`.
///
/// View 1's cloud is first carried into camera 2 with the known first-frame
/// extrinsics, then refined by trimmed ICP.
pub fn geometry_reward(v1: &ViewObservation, v2: &ViewObservation, cfg: &GeometryRewardConfig) -> Result<(f64, f64)> {
    let c1 = view_cloud(v1, cfg.confidence_threshold);
    let c2 = view_cloud(v2, cfg.confidence_threshold);
    let prealign = v2.camera.first().compose(&v1.camera.first().inverse());
    let source = c1.transformed(&prealign);
    let reg = register_clouds(&source, &c2, cfg)?;
    let aligned = source.transformed(&reg.transform);
    let d = chamfer_distance(&aligned, &c2)?;
    Ok(((-d).exp(), d))
}

/// `λ_g·r_g + λ_m·r_m` for a view pair.
pub fn combined_reward(
    v1: &ViewObservation,
    v2: &ViewObservation,
    weights: RewardWeights,
    cfg: &GeometryRewardConfig,
) -> Result<RewardBreakdown> {
    let (_, d_g) = geometry_reward(v1, v2, cfg)?;
    let (_, d_m) = motion_reward(v1, v2)?;
    Ok(RewardBreakdown::from_distances(d_g, d_m, weights))
}

/// Reward of `N ≥ 2` views: component rewards and distances averaged over
/// all unordered pairs.
pub fn score_views(views: &[ViewObservation], weights: RewardWeights, cfg: &GeometryRewardConfig) -> Result<RewardBreakdown> {
    if views.len() < 2 {
        return Err(Error::WrongViewCount {
            expected: 2,
            got: views.len(),
        });
    }
    let mut acc = [0.0; 4];
    let mut pairs = 0usize;
    for i in 0..views.len() {
        for j in (i + 1)..views.len() {
            let b = combined_reward(&views[i], &views[j], weights, cfg)?;
            acc[0] += b.r_g;
            acc[1] += b.r_m;
            acc[2] += b.d_g;
            acc[3] += b.d_m;
            pairs += 1;
        }
    }
    let n = pairs as f64;
    let (r_g, r_m) = (acc[0] / n, acc[1] / n);
    Ok(RewardBreakdown {
        r_g,
        r_m,
        combined: weights.geometry * r_g + weights.motion * r_m,
        d_g: acc[2] / n,
        d_m: acc[3] / n,
    })
}
