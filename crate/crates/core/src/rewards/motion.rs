use crate::geometry::NearestIndex;
use crate::world::{TrackSet, ViewObservation};
use crate::{Error, Result, RigidTransformd};

/// Maps every track point by `c1 ∘ c2⁻¹`.
///
/// With world→camera extrinsics this carries camera-2 coordinates into
/// camera 1; call it as `align_tracks(t, c_target, c_source)`.
pub fn align_tracks(tracks: &TrackSet, c1: &RigidTransformd, c2: &RigidTransformd) -> TrackSet {
    tracks.transformed(&c1.compose(&c2.inverse()))
}

/// For each track of `t1`, the index of the `t2` track whose temporal
/// average is nearest (lowest index on ties). Many-to-one is allowed.
pub fn match_tracks(t1: &TrackSet, t2: &TrackSet) -> Result<Vec<usize>> {
    if t1.tracks() == 0 || t2.tracks() == 0 {
        return Err(Error::EmptyTracks);
    }
    if t1.frames() != t2.frames() {
        return Err(Error::MismatchedFrameCount(t1.frames(), t2.frames()));
    }
    let index = NearestIndex::from_points(t2.temporal_averages())?;
    Ok(t1
        .temporal_averages()
        .into_iter()
        .map(|a| index.nearest_index(a).0)
        .collect())
}

/// Mean per-point Euclidean distance between `t1` and its matched `t2` tracks.
pub fn track_distance(t1: &TrackSet, t2: &TrackSet, matching: &[usize]) -> f64 {
    let frames = t1.frames();
    let mut sum = 0.0;
    for (i, &j) in matching.iter().enumerate() {
        for t in 0..frames {
            sum += t1.get(i, t).distance(t2.get(j, t));
        }
    }
    sum / (t1.tracks() * frames) as f64
}

/// Motion distance between two track sets given their first-frame
/// extrinsics: align `t1` into camera 2, match by temporal average, average
/// the point distances. Returns `(r_m, d_m)`.
pub fn motion_distance(
    t1: &TrackSet,
    c1: &RigidTransformd,
    t2: &TrackSet,
    c2: &RigidTransformd,
) -> Result<(f64, f64)> {
    if t1.frames() != t2.frames() {
        return Err(Error::MismatchedFrameCount(t1.frames(), t2.frames()));
    }
    let aligned = align_tracks(t1, c2, c1);
    let matching = match_tracks(&aligned, t2)?;
    let d = track_distance(&aligned, t2, &matching);
    Ok(((-d).exp(), d))
}

/// Motion consistency reward of a view pair. Returns `(r_m, d_m)`.
pub fn motion_reward(v1: &ViewObservation, v2: &ViewObservation) -> Result<(f64, f64)> {
    motion_distance(&v1.tracks, v1.camera.first(), &v2.tracks, v2.camera.first())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point3d;

    fn tracks(n: usize, frames: usize, offset: f64) -> TrackSet {
        let pos = (0..n)
            .flat_map(|i| (0..frames).map(move |t| Point3d::new(i as f64 * 2.0 + offset, 0.1 * t as f64, 0.0)))
            .collect();
        TrackSet::new(pos, n, frames).unwrap()
    }

    #[test]
    fn identity_matching_and_reversal() {
        let t = tracks(5, 4, 0.0);
        assert_eq!(match_tracks(&t, &t).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(match_tracks(&t, &t.reversed()).unwrap(), vec![4, 3, 2, 1, 0]);
    }

    #[test]
    fn frame_mismatch() {
        let a = tracks(3, 4, 0.0);
        let b = tracks(3, 5, 0.0);
        assert!(matches!(match_tracks(&a, &b), Err(Error::MismatchedFrameCount(4, 5))));
    }

    #[test]
    fn uniform_offset_gives_offset_distance() {
        let a = tracks(4, 6, 0.0);
        let b = tracks(4, 6, 0.25);
        let id = RigidTransformd::identity();
        let (r, d) = motion_distance(&a, &id, &b, &id).unwrap();
        assert!((d - 0.25).abs() < 1e-12);
        assert!((r - (-0.25f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn alignment_special_cases() {
        let t = tracks(2, 3, 0.0);
        let c = RigidTransformd::from_axis_angle(Point3d::new(0.1, 0.2, 0.3), Point3d::new(1.0, 0.0, 0.0));
        let same = align_tracks(&t, &c, &c);
        for (a, b) in same.positions().iter().zip(t.positions()) {
            assert!((*a - *b).norm() < 1e-12);
        }
        let d = Point3d::new(0.5, -1.0, 2.0);
        let shifted = align_tracks(&t, &RigidTransformd::from_translation(d), &RigidTransformd::identity());
        for (a, b) in shifted.positions().iter().zip(t.positions()) {
            assert!((*a - (*b + d)).norm() < 1e-15);
        }
    }
}
