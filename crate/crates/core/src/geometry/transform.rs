use serde::{Deserialize, Serialize};

use super::Point3;
use crate::{Error, Result, Scalar};

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Scalar> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Mat3([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        Mat3(out)
    }

    pub fn mul_vec(&self, p: Point3<T>) -> Point3<T> {
        let m = &self.0;
        Point3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
        )
    }

    pub fn determinant(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Max-abs entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> T {
        let g = self.transpose().mul_mat(self);
        let mut worst = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g.0[i][j] - target).abs());
            }
        }
        worst
    }

    fn row(&self, i: usize) -> Point3<T> {
        Point3::from_array(self.0[i])
    }

    /// Rotation about a unit-less axis-angle vector (Rodrigues).
    pub fn from_axis_angle(w: Point3<T>) -> Self {
        let theta = w.norm();
        if theta <= T::epsilon() {
            // first-order expansion keeps tiny rotations well-conditioned
            let m = Mat3([
                [T::one(), -w.z, w.y],
                [w.z, T::one(), -w.x],
                [-w.y, w.x, T::one()],
            ]);
            return m.gram_schmidt();
        }
        let k = w / theta;
        let (s, c) = theta.sin_cos();
        let v = T::one() - c;
        Mat3([
            [c + k.x * k.x * v, k.x * k.y * v - k.z * s, k.x * k.z * v + k.y * s],
            [k.y * k.x * v + k.z * s, c + k.y * k.y * v, k.y * k.z * v - k.x * s],
            [k.z * k.x * v - k.y * s, k.z * k.y * v + k.x * s, c + k.z * k.z * v],
        ])
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> T {
        let two = T::lit(2.0);
        let c = ((self.trace() - T::one()) / two).max(-T::one()).min(T::one());
        c.acos()
    }

    /// Re-orthonormalises the rows with Gram–Schmidt, keeping det = +1.
    pub fn gram_schmidt(&self) -> Self {
        let r0 = self.row(0);
        let e0 = r0 / r0.norm();
        let r1 = self.row(1);
        let u1 = r1 - e0 * e0.dot(r1);
        let e1 = u1 / u1.norm();
        let e2 = e0.cross(e1);
        Mat3([e0.to_array(), e1.to_array(), e2.to_array()])
    }
}

/// Element of SE(3): `p ↦ rotation·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform<T> {
    rotation: Mat3<T>,
    translation: Point3<T>,
}

impl<T: Scalar> Default for RigidTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Scalar> RigidTransform<T> {
    /// Validated constructor: rotation must be orthonormal with det +1.
    pub fn new(rotation: Mat3<T>, translation: Point3<T>) -> Result<Self> {
        let tol = T::lit(T::ORTHO_TOL);
        let ortho = rotation.orthonormality_error();
        if !(ortho < tol) {
            return Err(Error::InvalidTransform(format!(
                "rotation not orthonormal (error {:e})",
                ortho.as_f64()
            )));
        }
        let det = rotation.determinant();
        if !((det - T::one()).abs() < tol) {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant {} != 1",
                det.as_f64()
            )));
        }
        if !translation.is_finite() {
            return Err(Error::InvalidTransform("non-finite translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Skips validation; callers guarantee a proper rotation.
    pub(crate) fn from_parts(rotation: Mat3<T>, translation: Point3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::from_parts(Mat3::identity(), Point3::zero())
    }

    pub fn from_translation(t: Point3<T>) -> Self {
        Self::from_parts(Mat3::identity(), t)
    }

    /// Rotation given as an axis-angle vector followed by a translation.
    pub fn from_axis_angle(w: Point3<T>, t: Point3<T>) -> Self {
        Self::from_parts(Mat3::from_axis_angle(w), t)
    }

    pub fn rotation(&self) -> &Mat3<T> {
        &self.rotation
    }

    pub fn translation(&self) -> Point3<T> {
        self.translation
    }

    pub fn apply(&self, p: Point3<T>) -> Point3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_parts(
            self.rotation.mul_mat(&other.rotation),
            self.rotation.mul_vec(other.translation) + self.translation,
        )
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::from_parts(rt, -rt.mul_vec(self.translation))
    }

    pub fn renormalized(&self) -> Self {
        Self::from_parts(self.rotation.gram_schmidt(), self.translation)
    }

    /// Angle of the relative rotation `selfᵀ·other`.
    pub fn rotation_angle_to(&self, other: &Self) -> T {
        self.rotation.transpose().mul_mat(&other.rotation).rotation_angle()
    }

    /// 4x4 homogeneous matrix, row-major.
    pub fn to_homogeneous(&self) -> [[T; 4]; 4] {
        let r = &self.rotation.0;
        let t = self.translation;
        let (z, o) = (T::zero(), T::one());
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [z, z, z, o],
        ]
    }

    pub fn cast<U: Scalar>(&self) -> RigidTransform<U> {
        let r = self.rotation.0.map(|row| row.map(|v| U::lit(v.as_f64())));
        RigidTransform::from_parts(Mat3(r), self.translation.cast())
    }

    pub fn is_identity(&self, tol: T) -> bool {
        let id = Mat3::<T>::identity();
        (0..3).all(|i| (0..3).all(|j| (self.rotation.0[i][j] - id.0[i][j]).abs() <= tol))
            && self.translation.norm() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = Point3<f64>;

    fn rot_z(angle: f64) -> RigidTransform<f64> {
        RigidTransform::from_axis_angle(P::new(0.0, 0.0, angle), P::zero())
    }

    #[test]
    fn identity_leaves_points() {
        let p = P::new(1.0, 2.0, 3.0);
        assert_eq!(RigidTransform::identity().apply(p), p);
    }

    #[test]
    fn quarter_turn_about_z() {
        let q = rot_z(std::f64::consts::FRAC_PI_2).apply(P::new(1.0, 0.0, 0.0));
        assert!((q - P::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pure_translation() {
        let t = RigidTransform::from_translation(P::new(1.0, 1.0, 1.0));
        assert_eq!(t.apply(P::zero()), P::new(1.0, 1.0, 1.0));
        let inv = RigidTransform::from_translation(P::new(1.0, 2.0, 3.0)).inverse();
        assert!(inv.rotation().orthonormality_error() == 0.0);
        assert_eq!(inv.translation(), P::new(-1.0, -2.0, -3.0));
    }

    #[test]
    fn identity_inverse_and_compose() {
        let id = RigidTransform::<f64>::identity();
        assert!(id.inverse().is_identity(0.0));
        let t = RigidTransform::from_axis_angle(P::new(0.3, -0.2, 0.5), P::new(1.0, -2.0, 0.5));
        assert_eq!(id.compose(&t), t);
        assert!(t.compose(&t.inverse()).is_identity(1e-12));
    }

    #[test]
    fn rejects_non_rotation() {
        let mut m = Mat3::<f64>::identity();
        m.0[0][0] = -1.0;
        assert!(RigidTransform::new(m, P::zero()).is_err());
        m.0[0][0] = 1.1;
        assert!(RigidTransform::new(m, P::zero()).is_err());
        assert!(RigidTransform::new(Mat3::identity(), P::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn gram_schmidt_repairs_drift() {
        let mut m = rot_z(0.4).rotation().0;
        m[0][1] += 1e-6;
        let fixed = Mat3(m).gram_schmidt();
        assert!(fixed.orthonormality_error() < 1e-15);
        assert!((fixed.determinant() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_angle_matches_axis_angle() {
        let r = Mat3::from_axis_angle(P::new(0.1, 0.2, -0.3));
        let expected = (0.01f64 + 0.04 + 0.09).sqrt();
        assert!((r.rotation_angle() - expected).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let t = RigidTransform::<f32>::from_axis_angle(
            Point3::new(0.0, 0.0, std::f32::consts::FRAC_PI_2),
            Point3::new(1.0, 0.0, 0.0),
        );
        let q = t.apply(Point3::new(1.0, 0.0, 0.0));
        assert!((q - Point3::new(1.0, 1.0, 0.0)).norm() < 1e-6);
        assert!(RigidTransform::new(*t.rotation(), t.translation()).is_ok());
    }
}
