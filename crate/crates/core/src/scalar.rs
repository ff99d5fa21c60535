//! Scalar abstraction for the real-valued parts of the library.
//!
//! Counting is done in integers throughout. Distances, thresholds, ratios and
//! sample-size formulas are written once against [`Scalar`] and instantiated
//! for `f32` and `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable as a float")
    }

    fn of_f64(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable as a float")
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
