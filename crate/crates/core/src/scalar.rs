//! Numeric traits the analytic code is generic over.
//!
//! The MTTDL closed forms only need field operations, so they accept anything
//! implementing [`Scalar`]: `f32`, `f64`, or an exact rational such as
//! [`crate::Exact`]. The lifetime model needs `exp`/`powf` and is bounded by
//! [`Real`] instead.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// A field element usable by the MTTDL formulas.
pub trait Scalar: Num + Clone + PartialOrd + Debug {
    fn from_count(n: usize) -> Self;
}

impl<T> Scalar for T
where
    T: Num + Clone + PartialOrd + Debug + FromPrimitive,
{
    fn from_count(n: usize) -> Self {
        T::from_usize(n).expect("count is representable in the scalar type")
    }
}

/// Floating-point scalar: f32 or f64.
pub trait Real: Float + FromPrimitive + Scalar {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal is representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
