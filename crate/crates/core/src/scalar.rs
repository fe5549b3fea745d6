//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! The engine is written against [`Scalar`] so the same code runs in `f32`
//! (the on-disk precision) or `f64` (the default in-memory precision). The
//! exact transportation solver is additionally generic over [`FlowValue`],
//! which admits exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Floating point type usable by the engine: `f32` or `f64`.
pub trait Scalar:
    Float + FlowValue + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    /// Converts a count into this type.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Value type for the exact transportation simplex.
///
/// Floating point types compare against a small pivot tolerance; exact
/// rationals use a zero tolerance.
pub trait FlowValue: Copy + PartialOrd + Num + Signed + Debug {
    /// Magnitude below which a reduced cost or flow is treated as zero,
    /// given the largest absolute cost of the instance.
    fn pivot_tolerance(cost_scale: Self) -> Self;
}

impl FlowValue for f64 {
    fn pivot_tolerance(cost_scale: Self) -> Self {
        1e-12 * cost_scale.max(1.0)
    }
}

impl FlowValue for f32 {
    fn pivot_tolerance(cost_scale: Self) -> Self {
        1e-6 * cost_scale.max(1.0)
    }
}

impl FlowValue for Ratio<i64> {
    fn pivot_tolerance(_: Self) -> Self {
        Ratio::from_integer(0)
    }
}

impl FlowValue for Ratio<i128> {
    fn pivot_tolerance(_: Self) -> Self {
        Ratio::from_integer(0)
    }
}
