//! Floating point abstraction shared by the geometry layer.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the geometric core is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Tolerance used when validating rotation matrices.
    const ORTHO_TOL: f64;

    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float to f64")
    }
}

impl Scalar for f32 {
    const ORTHO_TOL: f64 = 1e-4;
}

impl Scalar for f64 {
    const ORTHO_TOL: f64 = 1e-9;
}
