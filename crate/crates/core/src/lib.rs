//! Shared-world consistency rewards and group-relative policy finetuning
//! over a synthetic multi-view world simulator.
//!
//! The geometric layer ([`geometry`], registration and Chamfer in
//! [`rewards`]) is generic over [`Scalar`]; the double-precision aliases
//! below are what the rest of the pipeline uses.

mod error;
pub mod geometry;
pub mod metrics;
pub mod policy;
pub mod rewards;
pub mod trainer;
mod scalar;
pub mod seed;
pub mod world;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point3d = geometry::Point3<f64>;
pub type RigidTransformd = geometry::RigidTransform<f64>;
pub type PointCloudd = geometry::PointCloud<f64>;
pub type NearestIndexd = geometry::NearestIndex<f64>;

pub type Point3f = geometry::Point3<f32>;
pub type RigidTransformf = geometry::RigidTransform<f32>;
pub type PointCloudf = geometry::PointCloud<f32>;
