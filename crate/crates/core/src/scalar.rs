//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used for probabilities, rewards and values.
///
/// Implemented for `f32` and `f64`. Tolerances scale with the precision of the
/// type: `f64` uses the `1e-9` stochasticity tolerance throughout, `f32` a
/// looser one.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance used when checking that probabilities sum to one.
    fn stochastic_tol() -> Self;

    /// Slack used when comparing values for argmax ties.
    fn tie_tol() -> Self;

    /// Converts an `f64` literal; every finite `f64` is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite value")
    }

    /// Clamps into `[0, 1]`.
    #[inline]
    fn clamp01(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }
}

impl Real for f64 {
    fn stochastic_tol() -> Self {
        1e-9
    }

    fn tie_tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn stochastic_tol() -> Self {
        1e-5
    }

    fn tie_tol() -> Self {
        1e-6
    }
}
