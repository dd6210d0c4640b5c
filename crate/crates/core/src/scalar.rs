//! Coefficient field abstraction.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Coefficient type for polynomials and moment sequences.
///
/// Implemented for `f64` and for exact rationals (`BigRational`). The
/// numerical layers (solver, extraction) work in `f64` only.
pub trait Scalar:
    Num + Clone + Debug + PartialOrd + std::ops::Neg<Output = Self> + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::zero)
    }

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl<T> Scalar for T where
    T: Num
        + Clone
        + Debug
        + PartialOrd
        + std::ops::Neg<Output = T>
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}
