//! Scalar abstraction for the whole crate.
//!
//! All numerical kernels are generic over [`Real`], which is satisfied by
//! `f32` and `f64`. Concrete aliases for the common `f64` instantiation live
//! at the crate root.

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the library computes with.
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum
{
}

impl<T> Real for T where
    T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum
{
}

/// Shorthand for lifting an `f64` literal into the working scalar type.
#[inline]
pub fn r<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must be representable in the scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar must convert to f64")
}
