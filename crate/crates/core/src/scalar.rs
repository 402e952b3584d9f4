//! Scalar abstractions shared by the numeric modules.
//!
//! [`Real`] covers the floating point types used by the time-constant
//! formulas and the optimizer. [`Amount`] covers anything that can be a
//! batch size, a queue length or a lattice weight: unsigned and signed
//! integers for exact queue arithmetic, floats for continuous workload.

use std::fmt::{Debug, Display};
use std::ops::{Add, Sub};

use num_traits::{Float, FloatConst, FromPrimitive, Zero};

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Nonnegative quantity carried through the queue recurrences and the
/// percolation dynamic program.
pub trait Amount:
    Copy + PartialOrd + Zero + Add<Output = Self> + Sub<Output = Self> + Debug + Display + Send + Sync + 'static
{
    fn to_f64(self) -> f64;

    /// True when the value lies below zero (never for unsigned types).
    fn is_negative(self) -> bool {
        self < Self::zero()
    }

    /// True for types with exact addition and comparison.
    const EXACT: bool;
}

macro_rules! int_amount {
    ($($t:ty),*) => {$(
        impl Amount for $t {
            const EXACT: bool = true;
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    )*};
}

macro_rules! float_amount {
    ($($t:ty),*) => {$(
        impl Amount for $t {
            const EXACT: bool = false;
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn is_negative(self) -> bool {
                // NaN counts as out of domain too
                !(self >= 0.0)
            }
        }
    )*};
}

int_amount!(u32, u64, i32, i64);
float_amount!(f32, f64);

/// Larger of two partially ordered values (first wins on ties).
#[inline]
pub(crate) fn max_of<T: PartialOrd>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Smaller of two partially ordered values (first wins on ties).
#[inline]
pub(crate) fn min_of<T: PartialOrd>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}
