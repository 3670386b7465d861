//! Floating-point abstraction shared by the geodesy and classifier math.
//!
//! Everything numeric in [`crate::geo`] and [`crate::analytics`] is written
//! against [`Real`] so the same code runs in `f32` for lightweight map
//! previews and `f64` for everything that is persisted or compared against
//! oracles. The concrete aliases live at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in every Real")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in every Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically stable `ln(sum(exp(x_i)))`.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum = xs
        .iter()
        .fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + sum.ln()
}
