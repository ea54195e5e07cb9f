//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use icworld::geometry::NearestIndex;
use icworld::world::TrackSet;
use icworld::{Point3d, PointCloudd, RigidTransformd};
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn point(rng: &mut impl Rng, scale: f64) -> Point3d {
    Point3d::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

/// Random rotation of angle at most `max_angle` about a random axis.
pub fn transform(rng: &mut impl Rng, max_angle: f64, max_shift: f64) -> RigidTransformd {
    let axis = loop {
        let a = point(rng, 1.0);
        if a.norm() > 1e-3 {
            break a / a.norm();
        }
    };
    let angle = rng.random_range(0.0..max_angle);
    RigidTransformd::from_axis_angle(axis * angle, point(rng, max_shift))
}

pub fn to_matrix4(t: &RigidTransformd) -> Matrix4<f64> {
    let h = t.to_homogeneous();
    Matrix4::from_fn(|r, c| h[r][c])
}

pub fn apply4(m: &Matrix4<f64>, p: Point3d) -> Point3d {
    let v = m * Vector4::new(p.x, p.y, p.z, 1.0);
    Point3d::new(v[0], v[1], v[2])
}

pub fn rotation3(t: &RigidTransformd) -> Matrix3<f64> {
    let r = t.rotation().0;
    Matrix3::from_fn(|i, j| r[i][j])
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Nearest point by exhaustive scan, lowest index on ties.
pub fn brute_nearest(points: &[Point3d], q: Point3d) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = p.distance_squared(q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Chamfer distance by exhaustive scan.
pub fn brute_chamfer(a: &PointCloudd, b: &PointCloudd) -> f64 {
    let dir = |x: &PointCloudd, y: &PointCloudd| {
        x.points().iter().map(|&p| brute_nearest(y.points(), p).1.sqrt()).sum::<f64>() / x.len() as f64
    };
    0.5 * (dir(a, b) + dir(b, a))
}

/// Track matching by exhaustive argmin over temporal averages.
pub fn brute_match(t1: &TrackSet, t2: &TrackSet) -> Vec<usize> {
    let avg2: Vec<Point3d> = (0..t2.tracks()).map(|j| t2.temporal_average(j)).collect();
    (0..t1.tracks())
        .map(|i| brute_nearest(&avg2, t1.temporal_average(i)).0)
        .collect()
}

/// Rigid fit with known correspondences via the SVD (Kabsch) solution.
pub fn svd_procrustes(src: &[Point3d], dst: &[Point3d]) -> (Matrix3<f64>, Vector3<f64>) {
    let v = |p: &Point3d| Vector3::new(p.x, p.y, p.z);
    let n = src.len() as f64;
    let cs = src.iter().map(v).sum::<Vector3<f64>>() / n;
    let cd = dst.iter().map(v).sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (v(s) - cs) * (v(d) - cd).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = vt.transpose() * d * u.transpose();
    (r, cd - r * cs)
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, scale: f64) -> PointCloudd {
    PointCloudd::from_points((0..n).map(|_| point(rng, scale)).collect()).unwrap()
}

pub fn index_of(points: &[Point3d]) -> NearestIndex<f64> {
    NearestIndex::from_points(points.to_vec()).unwrap()
}

pub struct RegistrationTrial {
    pub rotation_error_deg: f64,
    /// Translation error as a fraction of the cloud's bounding-box diagonal.
    pub translation_error: f64,
    /// Rotation gap between the truth and the known-correspondence fit.
    pub oracle_gap_deg: f64,
}

/// Registers a noisy, partially dropped copy of a world's first frame onto
/// a transformed noisy copy (rotation up to 30°).
pub fn registration_trial(seed: u64) -> RegistrationTrial {
    use icworld::rewards::{register_clouds, GeometryRewardConfig};
    use icworld::world::{generate_world, WorldConfig};
    use rand_distr::StandardNormal;

    let sigma = 0.005;
    let dropout = 0.2;
    let world = generate_world(&WorldConfig::default(), seed).unwrap();
    let pts = world.points_at(0);
    let mut r = rng(seed ^ 0x5EED);
    let truth = transform(&mut r, 30f64.to_radians(), 0.5);
    let noise = |r: &mut ChaCha8Rng| {
        Point3d::new(
            r.sample::<f64, _>(StandardNormal),
            r.sample::<f64, _>(StandardNormal),
            r.sample::<f64, _>(StandardNormal),
        ) * sigma
    };
    let src: Vec<Point3d> = pts.iter().map(|&p| p + noise(&mut r)).collect();
    let dst: Vec<Point3d> = pts.iter().map(|&p| truth.apply(p) + noise(&mut r)).collect();
    let (oracle_r, _) = svd_procrustes(&src, &dst);
    let keep = |v: &[Point3d], r: &mut ChaCha8Rng| {
        v.iter().copied().filter(|_| r.random::<f64>() >= dropout).collect::<Vec<_>>()
    };
    let src_kept = PointCloudd::from_points(keep(&src, &mut r)).unwrap();
    let dst_kept = PointCloudd::from_points(keep(&dst, &mut r)).unwrap();
    let reg = register_clouds(&src_kept, &dst_kept, &GeometryRewardConfig::default()).unwrap();
    let diameter = PointCloudd::from_points(src.clone()).unwrap().bbox_diagonal();
    let angle = |m: &Matrix3<f64>| ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees();
    let est = rotation3(&reg.transform);
    RegistrationTrial {
        rotation_error_deg: angle(&(est.transpose() * rotation3(&truth))),
        translation_error: reg.transform.translation().distance(truth.translation()) / diameter,
        oracle_gap_deg: angle(&(oracle_r.transpose() * rotation3(&truth))),
    }
}

/// A world whose dynamic points are about half of all points.
pub fn sweep_world() -> icworld::world::WorldConfig {
    icworld::world::WorldConfig {
        static_points: 120,
        object_count: 4,
        points_per_object: 30,
        ..Default::default()
    }
}

fn sweep_views(seed: u64) -> (icworld::world::ViewObservation, icworld::world::ViewObservation) {
    use icworld::world::{generate_cameras, generate_world, render_view};
    let cfg = sweep_world();
    let w = generate_world(&cfg, seed).unwrap();
    let cams = generate_cameras(&cfg, seed).unwrap();
    let v1 = render_view(&w, &cams[0], cfg.noise_sigma, cfg.dropout, seed ^ 1).unwrap();
    let v2 = render_view(&w, &cams[1], cfg.noise_sigma, cfg.dropout, seed ^ 2).unwrap();
    (v1, v2)
}

pub const GEOMETRY_SEVERITIES: [f64; 4] = [0.0, 0.1, 0.3, 1.0];
pub const MOTION_SKEWS: [f64; 4] = [0.0, 0.2, 0.5, 1.0];

/// `r_g` as view 2 is shifted by `s·d` and its motion skewed by `s`.
pub fn geometry_sweep(seed: u64) -> Vec<f64> {
    use icworld::rewards::{geometry_reward, GeometryRewardConfig};
    use icworld::world::perturb_view;
    let (v1, v2) = sweep_views(seed);
    let mut r = rng(seed ^ 0xD1);
    let dir = point(&mut r, 1.0);
    let dir = dir / dir.norm();
    GEOMETRY_SEVERITIES
        .iter()
        .map(|&s| {
            let p = perturb_view(&v2, &RigidTransformd::from_translation(dir * s), s);
            geometry_reward(&v1, &p, &GeometryRewardConfig::default()).unwrap().0
        })
        .collect()
}

/// `r_m` as view 2's motion is skewed.
pub fn motion_sweep(seed: u64) -> Vec<f64> {
    use icworld::rewards::motion_reward;
    use icworld::world::perturb_view;
    let (v1, v2) = sweep_views(seed);
    MOTION_SKEWS
        .iter()
        .map(|&s| motion_reward(&v1, &perturb_view(&v2, &RigidTransformd::identity(), s)).unwrap().0)
        .collect()
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Largest relative error between the analytic log-prob gradient and
/// central differences (h = 1e-5) over 64 seeded coordinates.
pub fn gradient_check(seed: u64) -> f64 {
    use icworld::policy::{log_prob, log_prob_and_grad, sample_trajectory, Conditioning, DenoiseSchedule, PolicyDims, PolicyParams};
    let dims = PolicyDims::default();
    let params = PolicyParams::init(dims, seed);
    let mut r = rng(seed ^ 0x6AD);
    let cond = Conditioning((0..dims.cond_dim).map(|_| r.random_range(-1.0..1.0)).collect());
    let sched = DenoiseSchedule::default();
    let traj = sample_trajectory(&params, &cond, &sched, seed).unwrap();
    let t = r.random_range(1..=sched.steps());
    let tr = traj.transition(t);
    let (_, grad) = log_prob_and_grad(&params, &tr, sched.steps(), &cond).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..64 {
        let i = r.random_range(0..params.len());
        let mut plus = params.clone();
        plus.as_mut_slice()[i] += h;
        let mut minus = params.clone();
        minus.as_mut_slice()[i] -= h;
        let fd = (log_prob(&plus, &tr, sched.steps(), &cond) - log_prob(&minus, &tr, sched.steps(), &cond)) / (2.0 * h);
        let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

pub fn dataset(count: usize, seed: u64) -> Vec<icworld::trainer::TrainWorld> {
    use icworld::policy::{DecodeConfig, PolicyDims};
    icworld::trainer::build_dataset(
        &icworld::world::WorldConfig::default(),
        &DecodeConfig::default(),
        count,
        seed,
        PolicyDims::default().cond_dim,
    )
    .unwrap()
}

/// Trains uninterrupted in one directory and, in another, stops at `split`,
/// leaves a stray log line behind as a crash would, then resumes. Returns
/// the two final parameter vectors and run logs.
pub fn resume_pair(
    cfg: &icworld::trainer::TrainerConfig,
    data: &[icworld::trainer::TrainWorld],
    init: &icworld::policy::PolicyParams,
    seed: u64,
    split: usize,
) -> (
    (icworld::policy::PolicyParams, icworld::trainer::RunLog),
    (icworld::policy::PolicyParams, icworld::trainer::RunLog),
) {
    use icworld::trainer::{train_in_dir, TrainerConfig, RUN_LOG_FILE};
    use std::io::Write;
    let full_dir = tempfile::tempdir().unwrap();
    let full = train_in_dir(init.clone(), data, cfg, seed, full_dir.path(), false).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let first = TrainerConfig { steps: split, ..cfg.clone() };
    let (_, partial) = train_in_dir(init.clone(), data, &first, seed, dir.path(), false).unwrap();
    let mut stray = partial.last().unwrap().clone();
    stray.step += 1;
    let mut f = std::fs::OpenOptions::new().append(true).open(dir.path().join(RUN_LOG_FILE)).unwrap();
    writeln!(f, "{}", serde_json::to_string(&stray).unwrap()).unwrap();
    drop(f);
    // the initial parameters are ignored on resume
    let junk = icworld::policy::PolicyParams::init(*init.dims(), seed ^ 0xFFFF);
    let resumed = train_in_dir(junk, data, cfg, seed, dir.path(), true).unwrap();
    (full, resumed)
}

/// Policy width used for end-to-end training runs.
pub fn training_dims() -> icworld::policy::PolicyDims {
    icworld::policy::PolicyDims { hidden: 192, ..Default::default() }
}

/// Default hyperparameters (M = 16, λ = 0.5, η = 1e-5, T = 4) with the whole
/// 8-world set as the batch and every denoising step updated.
pub fn training_config(steps: usize) -> icworld::trainer::TrainerConfig {
    icworld::trainer::TrainerConfig { steps, batch_size: 8, timestep_ratio: 1.0, ..Default::default() }
}
