use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Numeric type used for congestion measures and routing scores.
///
/// All routing arithmetic is written against this trait; the simulator
/// itself instantiates it with [`Measure`](crate::Measure).
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static {
    /// Sentinel for "unknown" or "unreachable".
    fn unreachable() -> Self {
        Self::infinity()
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
