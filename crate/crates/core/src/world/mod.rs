//! Procedural shared worlds and their per-camera observations.
//!
//! A world is a static point scene plus rigid dynamic objects moving along
//! piecewise-linear keyframed trajectories. Rendering a camera path yields
//! what a reconstruction front-end would report for one video: a point
//! cloud per frame in camera coordinates, plus 3D tracks of the dynamic
//! points.

pub mod io;
mod render;
mod tracks;

pub use render::{perturb_view, render_view, ViewObservation};
pub use tracks::TrackSet;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::geometry::Mat3;
use crate::seed::rng_for;
use crate::{Error, Point3d, PointCloudd, Result, RigidTransformd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub static_points: usize,
    pub scene_radius: f64,
    pub object_count: usize,
    pub points_per_object: usize,
    pub object_radius: f64,
    /// Frames per video (`T_p`).
    pub frames: usize,
    pub keyframes: usize,
    pub max_object_step: f64,
    /// Number of cameras (views) per world.
    pub views: usize,
    pub camera_distance: f64,
    pub camera_height: f64,
    /// Angle between neighbouring cameras on the ring, degrees.
    pub camera_spread_deg: f64,
    pub camera_jitter_deg: f64,
    /// Per-frame orbit of each camera, degrees. Zero gives static cameras.
    pub camera_orbit_deg: f64,
    pub noise_sigma: f64,
    pub dropout: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            static_points: 120,
            scene_radius: 1.0,
            object_count: 3,
            points_per_object: 12,
            object_radius: 0.15,
            frames: 13,
            keyframes: 3,
            max_object_step: 0.4,
            views: 2,
            camera_distance: 3.0,
            camera_height: 0.8,
            camera_spread_deg: 30.0,
            camera_jitter_deg: 5.0,
            camera_orbit_deg: 0.0,
            noise_sigma: 0.005,
            dropout: 0.1,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("world: {m}")));
        if self.static_points == 0 {
            return bad("static_points must be >= 1");
        }
        if self.object_count > 0 && self.points_per_object == 0 {
            return bad("points_per_object must be >= 1 when objects are present");
        }
        if self.frames < 2 {
            return bad("frames must be >= 2");
        }
        if self.keyframes < 2 {
            return bad("keyframes must be >= 2");
        }
        if self.views < 1 {
            return bad("views must be >= 1");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        for (name, v) in [
            ("scene_radius", self.scene_radius),
            ("object_radius", self.object_radius),
            ("camera_distance", self.camera_distance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Pose keyframe: yaw about the vertical axis, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub time: f64,
    pub translation: [f64; 3],
    pub yaw: f64,
}

impl Keyframe {
    fn pose(&self) -> RigidTransformd {
        RigidTransformd::from_axis_angle(
            Point3d::new(0.0, 0.0, self.yaw),
            Point3d::from_array(self.translation),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicObject {
    pub base_points: PointCloudd,
    pub keyframes: Vec<Keyframe>,
}

impl DynamicObject {
    pub fn new(base_points: PointCloudd, keyframes: Vec<Keyframe>) -> Result<Self> {
        if keyframes.is_empty() {
            return Err(Error::Config("object needs at least one keyframe".into()));
        }
        if keyframes.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::Config("keyframe times must be strictly increasing".into()));
        }
        Ok(Self {
            base_points,
            keyframes,
        })
    }

    /// Pose at time `t` (frame units), linear between keyframes and held
    /// constant outside their span.
    pub fn pose_at(&self, t: f64) -> RigidTransformd {
        let k = &self.keyframes;
        if t <= k[0].time {
            return k[0].pose();
        }
        if t >= k[k.len() - 1].time {
            return k[k.len() - 1].pose();
        }
        let i = k.partition_point(|kf| kf.time <= t) - 1;
        let (a, b) = (&k[i], &k[i + 1]);
        let s = (t - a.time) / (b.time - a.time);
        let lerp = |x: f64, y: f64| x + s * (y - x);
        Keyframe {
            time: t,
            translation: std::array::from_fn(|d| lerp(a.translation[d], b.translation[d])),
            yaw: lerp(a.yaw, b.yaw),
        }
        .pose()
    }

    pub fn points_at(&self, t: f64) -> impl Iterator<Item = Point3d> + '_ {
        let pose = self.pose_at(t);
        self.base_points.points().iter().map(move |&p| pose.apply(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedWorld {
    pub static_points: PointCloudd,
    pub objects: Vec<DynamicObject>,
    pub frames: usize,
    pub seed: u64,
}

impl SharedWorld {
    pub fn track_count(&self) -> usize {
        self.objects.iter().map(|o| o.base_points.len()).sum()
    }

    /// All points (static first, then object points in order) at frame `t`.
    pub fn points_at(&self, t: usize) -> Vec<Point3d> {
        let mut out = self.static_points.points().to_vec();
        for o in &self.objects {
            out.extend(o.points_at(t as f64));
        }
        out
    }
}

/// Per-frame world→camera extrinsics of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPath {
    pub extrinsics: Vec<RigidTransformd>,
}

impl CameraPath {
    pub fn new(extrinsics: Vec<RigidTransformd>) -> Result<Self> {
        if extrinsics.is_empty() {
            return Err(Error::Config("camera path needs at least one frame".into()));
        }
        Ok(Self { extrinsics })
    }

    pub fn fixed(extrinsic: RigidTransformd, frames: usize) -> Self {
        Self {
            extrinsics: vec![extrinsic; frames],
        }
    }

    pub fn len(&self) -> usize {
        self.extrinsics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extrinsics.is_empty()
    }

    pub fn first(&self) -> &RigidTransformd {
        &self.extrinsics[0]
    }

    pub fn is_static(&self) -> bool {
        self.extrinsics.windows(2).all(|w| w[0] == w[1])
    }
}

/// World→camera extrinsic of a camera at `eye` looking at `target`
/// (camera z forward, y down).
pub fn look_at(eye: Point3d, target: Point3d) -> RigidTransformd {
    let up = Point3d::new(0.0, 0.0, 1.0);
    let forward = target - eye;
    let forward = forward / forward.norm();
    let right = forward.cross(up);
    let right = right / right.norm();
    let down = forward.cross(right);
    let rotation = Mat3([right.to_array(), down.to_array(), forward.to_array()]).gram_schmidt();
    RigidTransformd::new(rotation, -rotation.mul_vec(eye)).expect("look-at builds a rotation")
}

pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<SharedWorld> {
    config.validate()?;
    let mut rng = rng_for(seed, &[0x57_4F52_4C44]);
    let r = config.scene_radius;

    // static scene: a ground patch plus a few boxes, giving an asymmetric shape
    let mut boxes = Vec::new();
    for _ in 0..3 {
        let c = Point3d::new(rng.random_range(-r..r) * 0.7, rng.random_range(-r..r) * 0.7, 0.0);
        let h = Point3d::new(
            rng.random_range(0.1..0.3) * r,
            rng.random_range(0.1..0.3) * r,
            rng.random_range(0.15..0.5) * r,
        );
        boxes.push((c, h));
    }
    let mut statics = Vec::with_capacity(config.static_points);
    for i in 0..config.static_points {
        if i % 2 == 0 {
            statics.push(Point3d::new(rng.random_range(-r..r), rng.random_range(-r..r), 0.0));
        } else {
            let (c, h) = boxes[(i / 2) % boxes.len()];
            statics.push(box_surface_point(&mut rng, c, h));
        }
    }
    let static_points = PointCloudd::from_points(statics)?;

    let mut objects = Vec::with_capacity(config.object_count);
    let span = (config.frames - 1) as f64;
    for _ in 0..config.object_count {
        let base: Vec<Point3d> = (0..config.points_per_object)
            .map(|_| {
                let dir: [f64; 3] = UnitSphere.sample(&mut rng);
                let rad = config.object_radius * rng.random_range(0.3..1.0);
                Point3d::from_array(dir) * rad
            })
            .collect();
        let mut pos = Point3d::new(
            rng.random_range(-r..r) * 0.6,
            rng.random_range(-r..r) * 0.6,
            config.object_radius + rng.random_range(0.0..0.3) * r,
        );
        let mut yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let mut keyframes = Vec::with_capacity(config.keyframes);
        for k in 0..config.keyframes {
            keyframes.push(Keyframe {
                time: span * k as f64 / (config.keyframes - 1) as f64,
                translation: pos.to_array(),
                yaw,
            });
            let step: [f64; 3] = UnitSphere.sample(&mut rng);
            let step = Point3d::new(step[0], step[1], 0.3 * step[2]) * config.max_object_step;
            pos += step;
            yaw += rng.random_range(-0.5..0.5);
        }
        objects.push(DynamicObject::new(PointCloudd::from_points(base)?, keyframes)?);
    }
    Ok(SharedWorld {
        static_points,
        objects,
        frames: config.frames,
        seed,
    })
}

fn box_surface_point(rng: &mut impl Rng, c: Point3d, h: Point3d) -> Point3d {
    let face = rng.random_range(0..5usize);
    let u = rng.random_range(-1.0..1.0);
    let v = rng.random_range(-1.0..1.0);
    // z spans [0, 2h.z]: boxes stand on the ground
    let (x, y, z) = match face {
        0 => (1.0, u, (v + 1.0) / 2.0),
        1 => (-1.0, u, (v + 1.0) / 2.0),
        2 => (u, 1.0, (v + 1.0) / 2.0),
        3 => (u, -1.0, (v + 1.0) / 2.0),
        _ => (u, v, 1.0),
    };
    Point3d::new(c.x + x * h.x, c.y + y * h.y, z * 2.0 * h.z)
}

/// One camera path per view on a ring around the scene centre.
pub fn generate_cameras(config: &WorldConfig, seed: u64) -> Result<Vec<CameraPath>> {
    config.validate()?;
    let mut rng = rng_for(seed, &[0x43_414D]);
    let centre = Point3d::new(0.0, 0.0, 0.2 * config.scene_radius);
    let base = rng.random_range(0.0..360.0f64);
    (0..config.views)
        .map(|k| {
            let jitter = if config.camera_jitter_deg > 0.0 {
                rng.random_range(-config.camera_jitter_deg..config.camera_jitter_deg)
            } else {
                0.0
            };
            let offset = (k as f64 - (config.views as f64 - 1.0) / 2.0) * config.camera_spread_deg;
            let extrinsics = (0..config.frames)
                .map(|t| {
                    let deg = base + offset + jitter + config.camera_orbit_deg * t as f64;
                    let a = deg.to_radians();
                    let eye = Point3d::new(
                        config.camera_distance * a.cos(),
                        config.camera_distance * a.sin(),
                        config.camera_height,
                    );
                    look_at(eye, centre)
                })
                .collect();
            CameraPath::new(extrinsics)
        })
        .collect()
}
