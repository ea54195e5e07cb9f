use super::{Point3, PointCloud};
use crate::{Error, Result, Scalar};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: T,
        left: usize,
        right: usize,
    },
}

/// Immutable k-d tree over the points of a cloud.
///
/// Queries are exact: the returned neighbour minimises Euclidean distance,
/// and among equidistant points the one with the lowest index wins.
#[derive(Debug, Clone)]
pub struct NearestIndex<T> {
    points: Vec<Point3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> NearestIndex<T> {
    pub fn build(cloud: &PointCloud<T>) -> Result<Self> {
        Self::from_points(cloud.points().to_vec())
    }

    pub fn from_points(points: Vec<Point3<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        let n = points.len();
        build_node(&points, &mut order, 0, n, &mut nodes);
        Ok(Self {
            points,
            order,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> Point3<T> {
        self.points[index]
    }

    /// Returns `(index, squared distance)` of the nearest point.
    pub fn nearest_index(&self, q: Point3<T>) -> (usize, T) {
        let mut best = (usize::MAX, T::infinity());
        self.search(0, q, &mut best);
        best
    }

    /// Nearest point and its Euclidean distance.
    pub fn nearest(&self, q: Point3<T>) -> (Point3<T>, T) {
        let (i, d2) = self.nearest_index(q);
        (self.points[i], d2.sqrt())
    }

    fn search(&self, node: usize, q: Point3<T>, best: &mut (usize, T)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = q.distance_squared(self.points[i]);
                    if d2 < best.1 || (d2 == best.1 && i < best.0) {
                        *best = (i, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q.coord(axis) - value;
                let (near, far) = if diff <= T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, best);
                // `<=` so equidistant points on the far side can still win ties
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build_node<T: Scalar>(
    points: &[Point3<T>],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node<T>>,
) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let axis = widest_axis(points, &order[start..end]);
    let mid = start + (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        points[a]
            .coord(axis)
            .partial_cmp(&points[b].coord(axis))
            .expect("finite coordinates")
    });
    let value = points[order[mid]].coord(axis);
    nodes.push(Node::Leaf { start, end });
    // left holds coords <= value, right holds coords >= value
    let left = build_node(points, order, start, mid, nodes);
    let right = build_node(points, order, mid, end, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

fn widest_axis<T: Scalar>(points: &[Point3<T>], idx: &[usize]) -> usize {
    let mut lo = [T::infinity(); 3];
    let mut hi = [T::neg_infinity(); 3];
    for &i in idx {
        let p = points[i].to_array();
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap())
        .unwrap_or(0)
}
