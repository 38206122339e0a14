//! Scalar abstraction: every numeric kernel in this crate is generic over
//! [`Real`], so the same code runs in `f32` or `f64`. The crate root exposes
//! `f64` aliases for the common entry points.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar type: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + NumCast
    + Sum<Self>
    + for<'a> Sum<&'a Self>
    + Serialize
    + DeserializeOwned
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("finite f64 converts to any Real")
    }

    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).expect("Real converts to f64")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_f64_lossy(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for `F::from_f64_lossy` in expression position.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64_lossy(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        let x: f32 = real(1.5);
        assert_eq!(x, 1.5_f32);
        let y: f64 = real(-2.25);
        assert_eq!(y.to_f64_lossy(), -2.25);
        assert_eq!(f64::from_usize_lossy(20_000), 20_000.0);
    }
}
