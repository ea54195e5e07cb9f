use serde::{Deserialize, Serialize};

use super::{Point3, RigidTransform};
use crate::{Error, Result, Scalar};

/// Points with a per-point confidence in `[0, 1]`.
///
/// Empty clouds are representable (filtering can produce them); every
/// consumer that needs points rejects them with [`Error::EmptyCloud`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud<T> {
    points: Vec<Point3<T>>,
    confidence: Vec<T>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(points: Vec<Point3<T>>, confidence: Vec<T>) -> Result<Self> {
        if points.len() != confidence.len() {
            return Err(Error::ConfidenceLength {
                points: points.len(),
                conf: confidence.len(),
            });
        }
        for (i, (p, c)) in points.iter().zip(&confidence).enumerate() {
            if !p.is_finite() || !c.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if *c < T::zero() || *c > T::one() {
                return Err(Error::Config(format!("confidence {} out of [0,1]", c.as_f64())));
            }
        }
        Ok(Self { points, confidence })
    }

    /// Cloud with every confidence set to 1.
    pub fn from_points(points: Vec<Point3<T>>) -> Result<Self> {
        let confidence = vec![T::one(); points.len()];
        Self::new(points, confidence)
    }

    pub(crate) fn from_parts(points: Vec<Point3<T>>, confidence: Vec<T>) -> Self {
        debug_assert_eq!(points.len(), confidence.len());
        Self { points, confidence }
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn confidence(&self) -> &[T] {
        &self.confidence
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point3<T>, T)> + '_ {
        self.points.iter().copied().zip(self.confidence.iter().copied())
    }

    /// Keeps points whose confidence is at least `level`.
    pub fn filter_confidence(&self, level: T) -> Self {
        let (points, confidence) = self.iter().filter(|&(_, c)| c >= level).unzip();
        Self { points, confidence }
    }

    pub fn transformed(&self, t: &RigidTransform<T>) -> Self {
        Self {
            points: self.points.iter().map(|&p| t.apply(p)).collect(),
            confidence: self.confidence.clone(),
        }
    }

    /// Concatenation of several clouds.
    pub fn union<'a>(clouds: impl IntoIterator<Item = &'a Self>) -> Self {
        let mut out = Self::default();
        for c in clouds {
            out.points.extend_from_slice(&c.points);
            out.confidence.extend_from_slice(&c.confidence);
        }
        out
    }

    /// Keeps at most `max_points` points using a fixed stride.
    pub fn strided(&self, max_points: usize) -> Self {
        if max_points == 0 || self.len() <= max_points {
            return self.clone();
        }
        let n = self.len();
        let (points, confidence) = (0..max_points)
            .map(|k| k * n / max_points)
            .map(|i| (self.points[i], self.confidence[i]))
            .unzip();
        Self { points, confidence }
    }

    /// Largest pairwise extent along the bounding box diagonal.
    pub fn bbox_diagonal(&self) -> T {
        if self.is_empty() {
            return T::zero();
        }
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points {
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (hi - lo).norm()
    }

    pub(crate) fn points_mut(&mut self) -> &mut [Point3<T>] {
        &mut self.points
    }

    /// Keeps the points whose mask entry is true.
    pub(crate) fn retain_mask(&mut self, keep: &[bool]) {
        debug_assert_eq!(keep.len(), self.len());
        let mut it = keep.iter();
        self.points.retain(|_| *it.next().unwrap());
        let mut it = keep.iter();
        self.confidence.retain(|_| *it.next().unwrap());
    }
}
