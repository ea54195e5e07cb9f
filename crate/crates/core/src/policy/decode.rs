use serde::{Deserialize, Serialize};

use super::LatentState;
use crate::seed::derive_seed;
use crate::world::{perturb_view, render_view, CameraPath, SharedWorld, ViewObservation};
use crate::{Error, Point3d, Result, RigidTransformd};

/// Width of one view slice: axis-angle (3), translation (3), motion skew (1).
pub const VIEW_WIDTH: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub gain: f64,
    pub noise_sigma: f64,
    pub dropout: f64,
    pub render_seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            gain: 0.3,
            noise_sigma: 0.005,
            dropout: 0.1,
            render_seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(Error::Config("decode gain must be >= 0".into()));
        }
        Ok(())
    }
}

/// Renders every camera of `world` without perturbation. View `k` uses a
/// render seed derived from `(render_seed, k)`.
pub fn render_base_views(world: &SharedWorld, cams: &[CameraPath], cfg: &DecodeConfig) -> Result<Vec<ViewObservation>> {
    cams.iter()
        .enumerate()
        .map(|(k, cam)| {
            render_view(
                world,
                cam,
                cfg.noise_sigma,
                cfg.dropout,
                derive_seed(cfg.render_seed, &[k as u64]),
            )
        })
        .collect()
}

/// Splits `z0` into per-view slices and applies each slice's perturbation
/// to the matching pre-rendered view.
pub fn decode_rendered(z0: &[f64], base: &[ViewObservation], gain: f64) -> Result<Vec<ViewObservation>> {
    if base.is_empty() || z0.len() != base.len() * VIEW_WIDTH {
        return Err(Error::DimensionMismatch {
            expected: base.len() * VIEW_WIDTH,
            got: z0.len(),
        });
    }
    Ok(z0
        .chunks(VIEW_WIDTH)
        .zip(base)
        .map(|(s, view)| {
            let (rot, trans, skew) = slice_perturbation(s, gain);
            perturb_view(view, &rot_trans(rot, trans), skew)
        })
        .collect())
}

/// Decodes a final latent into one observation per camera.
pub fn decode(z0: &LatentState, world: &SharedWorld, cams: &[CameraPath], cfg: &DecodeConfig) -> Result<Vec<ViewObservation>> {
    if z0.t != 0 {
        return Err(Error::Config(format!("decode expects t = 0, got t = {}", z0.t)));
    }
    if z0.z.len() != cams.len() * VIEW_WIDTH {
        return Err(Error::DimensionMismatch {
            expected: cams.len() * VIEW_WIDTH,
            got: z0.z.len(),
        });
    }
    let base = render_base_views(world, cams, cfg)?;
    decode_rendered(&z0.z, &base, cfg.gain)
}

fn slice_perturbation(s: &[f64], gain: f64) -> (Point3d, Point3d, f64) {
    (
        Point3d::new(s[0], s[1], s[2]) * gain,
        Point3d::new(s[3], s[4], s[5]) * gain,
        s[6] * gain,
    )
}

fn rot_trans(axis_angle: Point3d, translation: Point3d) -> RigidTransformd {
    RigidTransformd::from_axis_angle(axis_angle, translation)
}
