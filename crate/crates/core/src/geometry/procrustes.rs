use super::{centroid, Mat3, Point3, RigidTransform};
use crate::{Error, Result, Scalar};

/// Least-squares rigid transform mapping `source[i]` onto `target[i]`.
///
/// Closed form via the unit-quaternion formulation: the optimal rotation is
/// the dominant eigenvector of a symmetric 4x4 matrix built from the
/// cross-covariance, found here with cyclic Jacobi sweeps.
pub fn fit_rigid<T: Scalar>(source: &[Point3<T>], target: &[Point3<T>]) -> Result<RigidTransform<T>> {
    if source.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: source.len(),
            got: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::DegenerateCloud(format!(
            "{} correspondences, need at least 3",
            source.len()
        )));
    }
    let cs = centroid(source);
    let ct = centroid(target);
    let mut s = [[T::zero(); 3]; 3];
    for (&a, &b) in source.iter().zip(target) {
        let a = (a - cs).to_array();
        let b = (b - ct).to_array();
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = s[i][j] + a[i] * b[j];
            }
        }
    }
    let [[sxx, sxy, sxz], [syx, syy, syz], [szx, szy, szz]] = s;
    let n = [
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
    ];
    let (values, vectors) = jacobi_eigen4(n);
    let k = (0..4)
        .max_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap())
        .unwrap();
    let q = [vectors[0][k], vectors[1][k], vectors[2][k], vectors[3][k]];
    let rotation = quaternion_to_matrix(q).gram_schmidt();
    let translation = ct - rotation.mul_vec(cs);
    Ok(RigidTransform::from_parts(rotation, translation))
}

fn quaternion_to_matrix<T: Scalar>(q: [T; 4]) -> Mat3<T> {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let [w, x, y, z] = q.map(|v| v / norm);
    let two = T::lit(2.0);
    let one = T::one();
    Mat3([
        [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
    ])
}

/// Eigen-decomposition of a symmetric 4x4 matrix. Eigenvectors are columns.
fn jacobi_eigen4<T: Scalar>(mut a: [[T; 4]; 4]) -> ([T; 4], [[T; 4]; 4]) {
    let mut v = [[T::zero(); 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for _sweep in 0..64 {
        let mut off = T::zero();
        for i in 0..4 {
            for j in (i + 1)..4 {
                off = off + a[i][j] * a[i][j];
            }
        }
        let scale: T = (0..4).fold(T::zero(), |acc, i| acc + a[i][i] * a[i][i]);
        if off <= T::epsilon() * T::epsilon() * scale.max(T::min_positive_value()) {
            break;
        }
        for p in 0..4 {
            for q in (p + 1)..4 {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2], a[3][3]], v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_transform() {
        let truth = RigidTransform::from_axis_angle(Point3::new(0.4, -0.7, 1.1), Point3::new(0.5, -1.0, 2.0));
        let src: Vec<Point3<f64>> = (0..20)
            .map(|i| {
                let f = i as f64;
                Point3::new(f.sin() * 2.0, (f * 0.7).cos(), f * 0.1 - 1.0)
            })
            .collect();
        let dst: Vec<_> = src.iter().map(|&p| truth.apply(p)).collect();
        let fit = fit_rigid(&src, &dst).unwrap();
        assert!(fit.rotation_angle_to(&truth) < 1e-9);
        assert!((fit.translation() - truth.translation()).norm() < 1e-9);
    }

    #[test]
    fn half_turn_is_handled() {
        let truth = RigidTransform::from_axis_angle(Point3::new(0.0, std::f64::consts::PI, 0.0), Point3::zero());
        let src = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
            Point3::new(0.0, 0.0, 3.0),
            Point3::new(1.0, 1.0, 1.0),
        ];
        let dst: Vec<_> = src.iter().map(|&p| truth.apply(p)).collect();
        let fit = fit_rigid(&src, &dst).unwrap();
        assert!(fit.rotation_angle_to(&truth) < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let p = vec![Point3::<f64>::zero(); 2];
        assert!(matches!(fit_rigid(&p, &p), Err(Error::DegenerateCloud(_))));
    }
}
