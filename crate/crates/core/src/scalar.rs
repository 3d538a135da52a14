// SPDX-License-Identifier: Apache-2.0

//! Scalar abstractions.
//!
//! Delay models and learners are written against [`Real`], so the same code
//! runs in `f32` or `f64`. Closed-form cost accounting only needs field
//! arithmetic and is written against [`CostScalar`], which also admits exact
//! rationals such as `num_rational::Ratio<i64>`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Floating point type used by the delay models and attack learners.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Number type for energy bookkeeping.
pub trait CostScalar: Num + Clone + PartialOrd + FromPrimitive + Debug {
    fn count(n: u64) -> Self {
        Self::from_u64(n).expect("count fits the cost scalar")
    }
}

impl<T> CostScalar for T where T: Num + Clone + PartialOrd + FromPrimitive + Debug {}
