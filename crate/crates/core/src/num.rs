//! Scalar abstraction for the geometric parts of the simulator.
//!
//! Positions, velocities and distances are generic over [`Scalar`] so the
//! mobility model can run in `f32` (embedded targets) or `f64` (the
//! simulator default). Everything that feeds event ordering is integer.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
