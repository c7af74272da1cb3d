//! Scalar abstraction: everything numeric in this crate is generic over
//! [`Real`], instantiated as `f32` or `f64`. The default pipelines use
//! `f64` (see the aliases at the crate root) because the gradient checks
//! are run at tolerances that `f32` cannot hold.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable throughout the crate.
///
/// `Display`/`FromStr` are required because the text formats (.foa, CSV)
/// round-trip values through Rust's shortest-exact float formatting.
pub trait Real:
    Float + FromPrimitive + Display + LowerExp + FromStr + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for literals and file input.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant converts to scalar")
    }

    /// Lossy conversion to `f64`, for file output and reporting.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for `T::from_f64_lossy` at call sites dense with constants.
#[inline]
pub fn c<T: Real>(v: f64) -> T {
    T::from_f64_lossy(v)
}
