//! Trimmed point-to-point ICP with multiple starts.

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use super::GeometryRewardConfig;
use crate::geometry::{centroid, fit_rigid, NearestIndex, Point3, PointCloud, RigidTransform};
use crate::seed::rng_for;
use crate::{Error, Result, Scalar};

/// Outcome of registering a source cloud onto a target cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Registration<T> {
    /// Maps source coordinates into target coordinates.
    pub transform: RigidTransform<T>,
    /// Mean nearest-neighbour distance over the kept (untrimmed) pairs.
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Registers `source` onto `target` after confidence filtering.
///
/// Runs trimmed ICP on a coarse subsample of the source from the given pose
/// and from `restarts` centroid-aligned starts (the first unrotated, the
/// rest seeded random rotations), then refines the start with the lowest
/// trimmed residual on the full-size subsample. Hitting the iteration cap
/// is reported through [`Registration::converged`], not as an error.
pub fn register_clouds<T: Scalar>(
    source: &PointCloud<T>,
    target: &PointCloud<T>,
    cfg: &GeometryRewardConfig,
) -> Result<Registration<T>> {
    let level = T::lit(cfg.confidence_threshold);
    let source = source.filter_confidence(level);
    let target = target.filter_confidence(level);
    check_non_degenerate(&source, "source")?;
    check_non_degenerate(&target, "target")?;
    let coarse = source.strided(cfg.coarse_points);
    let source = source.strided(cfg.max_registration_points);
    let index = NearestIndex::build(&target)?;

    let cs = centroid(source.points());
    let ct = centroid(target.points());
    let mut starts = vec![RigidTransform::identity()];
    let mut rng = rng_for(cfg.seed, &[0x1C9]);
    for k in 0..cfg.restarts {
        let rot = if k == 0 {
            RigidTransform::identity()
        } else {
            let axis: [f64; 3] = UnitSphere.sample(&mut rng);
            let angle = cfg.restart_angle_deg.to_radians() * rng.random_range(0.5..1.0);
            let w = Point3::from_array(axis.map(|a| T::lit(a * angle)));
            RigidTransform::from_axis_angle(w, Point3::zero())
        };
        let to_origin = RigidTransform::from_translation(-cs);
        let to_target = RigidTransform::from_translation(ct);
        starts.push(to_target.compose(&rot).compose(&to_origin));
    }

    let mut best: Option<Registration<T>> = None;
    for start in starts {
        let reg = icp_from(&coarse, &index, start, cfg)?;
        if best.as_ref().is_none_or(|b| reg.residual < b.residual) {
            best = Some(reg);
        }
    }
    let best = best.expect("at least one start");
    icp_from(&source, &index, best.transform, cfg)
}

fn icp_from<T: Scalar>(
    source: &PointCloud<T>,
    index: &NearestIndex<T>,
    start: RigidTransform<T>,
    cfg: &GeometryRewardConfig,
) -> Result<Registration<T>> {
    let n = source.len();
    let keep = (((1.0 - cfg.trim_fraction) * n as f64).ceil() as usize).clamp(3.min(n), n);
    let tol = T::lit(cfg.icp_tolerance);
    let mut transform = start;
    let mut pairs: Vec<(T, usize, usize)> = Vec::with_capacity(n);
    let mut prev = T::infinity();
    let mut converged = false;
    let mut iterations = 0;
    let mut src = Vec::with_capacity(keep);
    let mut dst = Vec::with_capacity(keep);

    while iterations < cfg.icp_max_iters {
        iterations += 1;
        let residual = correspond(source, index, &transform, keep, &mut pairs);
        src.clear();
        dst.clear();
        for &(_, i, j) in &pairs[..keep] {
            src.push(source.points()[i]);
            dst.push(index.point(j));
        }
        transform = fit_rigid(&src, &dst)?;
        if (prev - residual).abs() < tol {
            converged = true;
            break;
        }
        prev = residual;
    }
    // residual of the final transform, so candidates compare fairly
    let residual = correspond(source, index, &transform, keep, &mut pairs);
    Ok(Registration {
        transform,
        residual,
        iterations,
        converged,
    })
}

/// Fills `pairs` with `(distance, source idx, target idx)` sorted so the
/// first `keep` entries are the closest; returns their mean distance.
fn correspond<T: Scalar>(
    source: &PointCloud<T>,
    index: &NearestIndex<T>,
    transform: &RigidTransform<T>,
    keep: usize,
    pairs: &mut Vec<(T, usize, usize)>,
) -> T {
    pairs.clear();
    for (i, &p) in source.points().iter().enumerate() {
        let (j, d2) = index.nearest_index(transform.apply(p));
        pairs.push((d2.sqrt(), i, j));
    }
    let cmp = |a: &(T, usize, usize), b: &(T, usize, usize)| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1));
    if keep < pairs.len() {
        pairs.select_nth_unstable_by(keep - 1, cmp);
    }
    pairs[..keep].sort_by(cmp);
    let sum = pairs[..keep].iter().fold(T::zero(), |acc, p| acc + p.0);
    sum / T::lit(keep as f64)
}

fn check_non_degenerate<T: Scalar>(cloud: &PointCloud<T>, which: &str) -> Result<()> {
    if cloud.len() < 3 {
        return Err(Error::DegenerateCloud(format!(
            "{which} has {} points after filtering, need 3",
            cloud.len()
        )));
    }
    let pts = cloud.points();
    let p0 = pts[0];
    let far = pts
        .iter()
        .copied()
        .max_by(|a, b| a.distance_squared(p0).partial_cmp(&b.distance_squared(p0)).unwrap())
        .unwrap();
    let axis = far - p0;
    let len = axis.norm();
    let scale = cloud.bbox_diagonal().max(T::min_positive_value());
    let spread = pts
        .iter()
        .map(|&p| if len > T::zero() { (p - p0).cross(axis).norm() / len } else { T::zero() })
        .fold(T::zero(), T::max);
    if len <= T::lit(1e-12) * scale || spread <= T::lit(1e-9) * scale {
        return Err(Error::DegenerateCloud(format!("{which} points are collinear")));
    }
    Ok(())
}
