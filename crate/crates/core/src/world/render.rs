use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CameraPath, SharedWorld, TrackSet};
use crate::seed::rng_for;
use crate::{Error, Point3d, PointCloudd, Result, RigidTransformd};

/// What the rewards see of one generated video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewObservation {
    /// One cloud per frame, camera coordinates.
    pub frames: Vec<PointCloudd>,
    pub tracks: TrackSet,
    pub camera: CameraPath,
    /// Per frame, `(point index, track index)` for every surviving dynamic point.
    pub track_membership: Vec<Vec<(usize, usize)>>,
}

impl ViewObservation {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Union of every frame cloud.
    pub fn aggregate_cloud(&self) -> PointCloudd {
        PointCloudd::union(&self.frames)
    }
}

/// Renders `world` through `camera`.
///
/// Each world point is mapped into the frame's camera coordinates, shifted
/// by isotropic Gaussian noise `e` with std `noise_sigma`, given confidence
/// `exp(−‖e‖/noise_sigma)` (1 when noise is off), and independently dropped
/// with probability `dropout`. Tracks carry the same noisy positions and are
/// never dropped.
pub fn render_view(
    world: &SharedWorld,
    camera: &CameraPath,
    noise_sigma: f64,
    dropout: f64,
    seed: u64,
) -> Result<ViewObservation> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise_sigma {noise_sigma} must be >= 0")));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::Config(format!("dropout {dropout} must lie in [0, 1)")));
    }
    if camera.len() != world.frames {
        return Err(Error::DimensionMismatch {
            expected: world.frames,
            got: camera.len(),
        });
    }
    let n_static = world.static_points.len();
    let n_tracks = world.track_count();
    let mut rng = rng_for(seed, &[0x52_454E_4445_52]);
    let mut track_pos = vec![Point3d::zero(); n_tracks * world.frames];
    let mut frames = Vec::with_capacity(world.frames);
    let mut membership = Vec::with_capacity(world.frames);

    for t in 0..world.frames {
        let ext = &camera.extrinsics[t];
        let world_points = world.points_at(t);
        let mut points = Vec::with_capacity(world_points.len());
        let mut conf = Vec::with_capacity(world_points.len());
        let mut keep = Vec::with_capacity(world_points.len());
        for &wp in &world_points {
            let mut p = ext.apply(wp);
            let mut c = 1.0;
            if noise_sigma > 0.0 {
                let e = Point3d::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ) * noise_sigma;
                p += e;
                c = (-(e.norm() / noise_sigma)).exp().clamp(0.0, 1.0);
            }
            points.push(p);
            conf.push(c);
            keep.push(!(dropout > 0.0 && rng.random::<f64>() < dropout));
        }
        for tr in 0..n_tracks {
            track_pos[tr * world.frames + t] = points[n_static + tr];
        }
        let mut frame_members = Vec::new();
        let mut next = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                if i >= n_static {
                    frame_members.push((next, i - n_static));
                }
                next += 1;
            }
        }
        let mut cloud = PointCloudd::from_parts(points, conf);
        cloud.retain_mask(&keep);
        frames.push(cloud);
        membership.push(frame_members);
    }
    let tracks = if n_tracks == 0 {
        // a static world still needs a well-formed track set: follow one
        // static point
        let anchor = world.static_points.points()[0];
        let pos = camera.extrinsics.iter().map(|e| e.apply(anchor)).collect();
        TrackSet::new(pos, 1, world.frames)?
    } else {
        TrackSet::new(track_pos, n_tracks, world.frames)?
    };
    Ok(ViewObservation {
        frames,
        tracks,
        camera: camera.clone(),
        track_membership: membership,
    })
}

/// Applies a rigid misalignment to every point and scales each track's
/// displacement from its first-frame position by `1 + motion_skew`.
///
/// Dynamic points inside the frame clouds move with their tracks, so the
/// frames stay coherent with the tracks.
pub fn perturb_view(obs: &ViewObservation, misalignment: &RigidTransformd, motion_skew: f64) -> ViewObservation {
    let mut out = obs.clone();
    if motion_skew != 0.0 {
        for (t, frame) in out.frames.iter_mut().enumerate() {
            let pts = frame.points_mut();
            for &(pi, tr) in &obs.track_membership[t] {
                pts[pi] += (obs.tracks.get(tr, t) - obs.tracks.get(tr, 0)) * motion_skew;
            }
        }
        let frames = obs.tracks.frames();
        for tr in 0..obs.tracks.tracks() {
            let origin = obs.tracks.get(tr, 0);
            for t in 0..frames {
                let p = obs.tracks.get(tr, t);
                out.tracks.positions_mut()[tr * frames + t] = origin + (p - origin) * (1.0 + motion_skew);
            }
        }
    }
    for frame in &mut out.frames {
        for p in frame.points_mut() {
            *p = misalignment.apply(*p);
        }
    }
    for p in out.tracks.positions_mut() {
        *p = misalignment.apply(*p);
    }
    out
}
