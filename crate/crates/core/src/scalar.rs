//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type implementing [`Real`].

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable throughout the display/optimization chain.
///
/// `f64` is the default everywhere precision matters (gradient checks, FFT
/// round trips); `f32` halves memory traffic for bulk workloads such as
/// network training.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + rustfft::FftNum + Debug + Display + LowerExp
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    /// Lossy conversion of a count or index.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in scalar")
    }

    /// Widening conversion for accumulation and reporting.
    #[inline]
    fn to_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar fits in f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
