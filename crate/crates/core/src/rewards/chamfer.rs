use crate::geometry::{NearestIndex, PointCloud};
use crate::{Error, Result, Scalar};

/// Symmetric Chamfer distance: the mean of the two directed mean
/// nearest-neighbour distances.
pub fn chamfer_distance<T: Scalar>(p1: &PointCloud<T>, p2: &PointCloud<T>) -> Result<T> {
    if p1.is_empty() || p2.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let i1 = NearestIndex::build(p1)?;
    let i2 = NearestIndex::build(p2)?;
    let forward = directed(p1, &i2);
    let backward = directed(p2, &i1);
    Ok((forward + backward) / T::lit(2.0))
}

/// Mean distance from each point of `from` to its nearest point in `to`.
pub fn directed<T: Scalar>(from: &PointCloud<T>, to: &NearestIndex<T>) -> T {
    let sum = from
        .points()
        .iter()
        .fold(T::zero(), |acc, &p| acc + to.nearest_index(p).1.sqrt());
    sum / T::lit(from.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Point3d, PointCloudd};

    fn cloud(pts: &[[f64; 3]]) -> PointCloudd {
        PointCloudd::from_points(pts.iter().map(|&a| Point3d::from_array(a)).collect()).unwrap()
    }

    #[test]
    fn hand_values() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[3.0, 0.0, 0.0]]);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 3.0);
        let c = cloud(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let d = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer_distance(&c, &d).unwrap(), 1.0);
        assert_eq!(chamfer_distance(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn empty_is_error() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        assert!(matches!(chamfer_distance(&a, &PointCloudd::default()), Err(Error::EmptyCloud)));
        assert!(matches!(chamfer_distance(&PointCloudd::default(), &a), Err(Error::EmptyCloud)));
    }

    #[test]
    fn single_precision() {
        let a = PointCloud::<f32>::from_points(vec![crate::Point3f::zero()]).unwrap();
        let b = PointCloud::<f32>::from_points(vec![crate::Point3f::new(0.0, 4.0, 0.0)]).unwrap();
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 4.0f32);
    }
}
