mod common;

use common::*;
use icworld::world::io::{load_observation, load_world, save_observation, save_world};
use icworld::world::{
    generate_cameras, generate_world, perturb_view, render_view, CameraPath, DynamicObject, Keyframe, SharedWorld,
    WorldConfig,
};
use icworld::{Point3d, PointCloudd, RigidTransformd};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn identity_cam(frames: usize) -> CameraPath {
    CameraPath::fixed(RigidTransformd::identity(), frames)
}

fn linear_world(delta: Point3d) -> SharedWorld {
    let base = PointCloudd::from_points(vec![Point3d::zero(), Point3d::new(0.1, 0.0, 0.0)]).unwrap();
    let obj = DynamicObject::new(
        base,
        vec![
            Keyframe { time: 0.0, translation: [0.0; 3], yaw: 0.0 },
            Keyframe { time: 12.0, translation: delta.to_array(), yaw: 0.0 },
        ],
    )
    .unwrap();
    SharedWorld {
        static_points: PointCloudd::from_points(vec![Point3d::new(1.0, 1.0, 0.0)]).unwrap(),
        objects: vec![obj],
        frames: 13,
        seed: 0,
    }
}

#[test]
fn generation_is_deterministic() {
    let cfg = WorldConfig::default();
    let a = generate_world(&cfg, 7).unwrap();
    let b = generate_world(&cfg, 7).unwrap();
    assert_eq!(a, b);
    let cams = generate_cameras(&cfg, 7).unwrap();
    let va = render_view(&a, &cams[0], 0.005, 0.1, 3).unwrap();
    let vb = render_view(&b, &cams[0], 0.005, 0.1, 3).unwrap();
    assert_eq!(va, vb);
    let bytes = |v: &icworld::world::ViewObservation| serde_json::to_vec(v).unwrap();
    assert_eq!(bytes(&va), bytes(&vb));
}

#[test]
fn zero_static_points_rejected() {
    let cfg = WorldConfig { static_points: 0, ..Default::default() };
    assert!(generate_world(&cfg, 1).is_err());
}

#[test]
fn objectless_world_is_static() {
    let cfg = WorldConfig { object_count: 0, ..Default::default() };
    let w = generate_world(&cfg, 3).unwrap();
    let cam = &generate_cameras(&cfg, 3).unwrap()[0];
    let v = render_view(&w, cam, 0.0, 0.0, 1).unwrap();
    for f in &v.frames[1..] {
        assert_eq!(f.points(), v.frames[0].points());
    }
    for t in 1..v.tracks.frames() {
        assert_eq!(v.tracks.get(0, t), v.tracks.get(0, 0));
    }
}

#[test]
fn linear_trajectory_displacement_matches_keyframes() {
    let delta = Point3d::new(0.6, -0.3, 0.2);
    let w = linear_world(delta);
    let v = render_view(&w, &identity_cam(13), 0.0, 0.0, 0).unwrap();
    for tr in 0..2 {
        let d = v.tracks.get(tr, 12) - v.tracks.get(tr, 0);
        assert!((d - delta).norm() < 1e-12);
        let mid = v.tracks.get(tr, 6) - v.tracks.get(tr, 0);
        assert!((mid - delta * 0.5).norm() < 1e-12);
    }
    // temporal average of a linear track is its midpoint
    let avg = v.tracks.temporal_average(0);
    assert!((avg - delta * 0.5).norm() < 1e-12);
}

#[test]
fn noiseless_identity_render_reproduces_world() {
    let cfg = WorldConfig::default();
    let w = generate_world(&cfg, 11).unwrap();
    let v = render_view(&w, &identity_cam(cfg.frames), 0.0, 0.0, 0).unwrap();
    for (t, f) in v.frames.iter().enumerate() {
        assert_eq!(f.points(), &w.points_at(t)[..]);
        assert!(f.confidence().iter().all(|&c| c == 1.0));
    }
}

#[test]
fn two_cameras_relate_by_their_extrinsics() {
    let cfg = WorldConfig::default();
    let w = generate_world(&cfg, 5).unwrap();
    let cams = generate_cameras(&cfg, 5).unwrap();
    let v1 = render_view(&w, &cams[0], 0.0, 0.0, 0).unwrap();
    let v2 = render_view(&w, &cams[1], 0.0, 0.0, 0).unwrap();
    let t = cams[1].first().compose(&cams[0].first().inverse());
    for (f1, f2) in v1.frames.iter().zip(&v2.frames) {
        for (&p, &q) in f1.points().iter().zip(f2.points()) {
            assert!((t.apply(p) - q).norm() < 1e-12);
        }
    }
}

#[test]
fn tracks_appear_in_frames_before_dropout() {
    let cfg = WorldConfig::default();
    let w = generate_world(&cfg, 9).unwrap();
    let cam = &generate_cameras(&cfg, 9).unwrap()[0];
    let v = render_view(&w, cam, 0.01, 0.0, 2).unwrap();
    let n_static = w.static_points.len();
    for (t, f) in v.frames.iter().enumerate() {
        for tr in 0..v.tracks.tracks() {
            assert_eq!(f.points()[n_static + tr], v.tracks.get(tr, t));
        }
    }
    let dropped = render_view(&w, cam, 0.01, 0.3, 2).unwrap();
    for (t, members) in dropped.track_membership.iter().enumerate() {
        for &(pi, tr) in members {
            assert_eq!(dropped.frames[t].points()[pi], dropped.tracks.get(tr, t));
        }
    }
}

#[test]
fn noise_norm_matches_gaussian_norm() {
    let sigma = 0.01;
    let n = 10_000;
    let mut r = rng(21);
    let pts: Vec<Point3d> = (0..n).map(|_| point(&mut r, 1.0)).collect();
    let w = SharedWorld {
        static_points: PointCloudd::from_points(pts.clone()).unwrap(),
        objects: Vec::new(),
        frames: 2,
        seed: 0,
    };
    let v = render_view(&w, &identity_cam(2), sigma, 0.0, 4).unwrap();
    let norms: Vec<f64> = v.frames[0].points().iter().zip(&pts).map(|(a, b)| a.distance(*b)).collect();
    let mean = norms.iter().sum::<f64>() / n as f64;
    let var = norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();

    // Monte-Carlo oracle from an independent stream
    let mut o = rng(0x0AC1E);
    let m = 200_000;
    let mc = (0..m)
        .map(|_| {
            let e: [f64; 3] = std::array::from_fn(|_| o.sample::<f64, _>(StandardNormal) * sigma);
            (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
        })
        .sum::<f64>()
        / m as f64;
    assert!((mean - mc).abs() < 3.0 * se, "mean {mean} oracle {mc} se {se}");
    let analytic = sigma * (8.0 / std::f64::consts::PI).sqrt();
    assert!((mc - analytic).abs() < 0.01 * analytic);

    for (c, d) in v.frames[0].confidence().iter().zip(&norms) {
        assert!((0.0..=1.0).contains(c));
        assert!((c - (-d / sigma).exp()).abs() < 1e-12);
    }
}

#[test]
fn render_preconditions() {
    let w = linear_world(Point3d::zero());
    assert!(render_view(&w, &identity_cam(13), -1.0, 0.0, 0).is_err());
    assert!(render_view(&w, &identity_cam(13), 0.0, 1.0, 0).is_err());
    assert!(render_view(&w, &identity_cam(5), 0.0, 0.0, 0).is_err());
}

#[test]
fn perturb_identity_is_noop() {
    let cfg = WorldConfig::default();
    let w = generate_world(&cfg, 2).unwrap();
    let cam = &generate_cameras(&cfg, 2).unwrap()[0];
    let v = render_view(&w, cam, 0.005, 0.1, 0).unwrap();
    assert_eq!(perturb_view(&v, &RigidTransformd::identity(), 0.0), v);
}

#[test]
fn perturb_translation_on_single_point() {
    let w = SharedWorld {
        static_points: PointCloudd::from_points(vec![Point3d::new(0.2, 0.1, 2.0)]).unwrap(),
        objects: Vec::new(),
        frames: 2,
        seed: 0,
    };
    let v = render_view(&w, &identity_cam(2), 0.0, 0.0, 0).unwrap();
    let d = Point3d::new(0.3, -0.4, 1.2);
    let p = perturb_view(&v, &RigidTransformd::from_translation(d), 0.0);
    for (a, b) in v.frames.iter().zip(&p.frames) {
        let c = icworld::rewards::chamfer_distance(a, b).unwrap();
        assert!((c - d.norm()).abs() < 1e-12);
    }
}

#[test]
fn perturb_skew_scales_linear_displacement() {
    let delta = Point3d::new(1.0, 0.5, 0.0);
    let v = render_view(&linear_world(delta), &identity_cam(13), 0.0, 0.0, 0).unwrap();
    let p = perturb_view(&v, &RigidTransformd::identity(), 0.5);
    let len = delta.norm();
    for tr in 0..p.tracks.tracks() {
        let d = p.tracks.get(tr, 12).distance(p.tracks.get(tr, 0));
        assert!((d - 1.5 * len).abs() < 1e-12);
    }
    // frame clouds follow the tracks
    for (t, members) in p.track_membership.iter().enumerate() {
        for &(pi, tr) in members {
            assert!((p.frames[t].points()[pi] - p.tracks.get(tr, t)).norm() < 1e-12);
        }
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = WorldConfig::default();
    let w = generate_world(&cfg, 4).unwrap();
    let cam = &generate_cameras(&cfg, 4).unwrap()[1];
    let v = render_view(&w, cam, 0.005, 0.1, 8).unwrap();
    let wp = dir.path().join("w.bin");
    let vp = dir.path().join("v.bin");
    save_world(&wp, &w).unwrap();
    save_observation(&vp, &v).unwrap();
    assert_eq!(load_world(&wp).unwrap(), w);
    assert_eq!(load_observation(&vp).unwrap(), v);
    assert!(load_observation(&dir.path().join("missing.bin")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rendering_is_a_pure_function(seed in any::<u64>(), rs in any::<u64>(), noise in 0.0..0.02f64, drop in 0.0..0.5f64) {
        let cfg = WorldConfig::default();
        let w = generate_world(&cfg, seed).unwrap();
        let cams = generate_cameras(&cfg, seed).unwrap();
        prop_assert!(cams.iter().all(|c| c.is_static()));
        let a = render_view(&w, &cams[0], noise, drop, rs).unwrap();
        let b = render_view(&w, &cams[0], noise, drop, rs).unwrap();
        prop_assert!(a.frames.iter().all(|f| f.confidence().iter().all(|c| (0.0..=1.0).contains(c))));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn trajectories_are_continuous(seed in any::<u64>(), t in 0.0..12.0f64) {
        let w = generate_world(&WorldConfig::default(), seed).unwrap();
        for o in &w.objects {
            let a = o.pose_at(t);
            let b = o.pose_at(t + 1e-7);
            prop_assert!(a.translation().distance(b.translation()) < 1e-5);
        }
    }
}
