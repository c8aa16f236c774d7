//! Scalar abstraction so every numeric kernel works for both `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the crate.
///
/// On-disk formats are pinned to little-endian `f32`; in memory any `Scalar`
/// works, so pipelines that need tighter tolerances can run in `f64` and
/// narrow at the serialization boundary.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssignOps
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + FftNum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` constant into `T`. Panics only if `T` cannot represent
/// any finite value, which no `Scalar` type exhibits.
#[inline]
pub fn cast<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("finite f64 converts to Scalar")
}

/// Sign with the convention `sign(0) = +1`, used to stabilize denominators
/// without ever flipping a zero term to the negative side.
#[inline]
pub fn sign_or_one<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}
