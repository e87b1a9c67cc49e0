//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Everything is written against [`Scalar`], which is satisfied by `f32` and
//! `f64`. The crate root re-exports `f64` aliases for the common case.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by models, solvers and estimators.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn from_count(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn machine_epsilon() -> Self {
        <Self as approx::AbsDiffEq>::default_epsilon()
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.to_f64_lossy().is_finite()
    }
}

impl<T> Scalar for T where
    T: RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}
