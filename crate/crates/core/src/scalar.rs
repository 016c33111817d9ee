//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real field used by graph, propagation, boosting and metric code.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; exact for `f64` itself.
    fn of(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Converts a count to the scalar type.
#[inline]
pub(crate) fn count<T: Real>(n: usize) -> T {
    T::of(n as f64)
}
