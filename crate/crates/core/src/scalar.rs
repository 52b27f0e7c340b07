//! Floating point abstraction shared by all numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point: f32 or f64.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + FromStr
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64, used for constants and config values.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar always converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.compensation += other.compensation;
    }

    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

/// Arithmetic mean with compensated summation, shifted by the first value so
/// that constant input is returned exactly. `None` for an empty slice.
pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    let &first = values.first()?;
    let mut acc = CompensatedSum::new();
    values.iter().for_each(|&v| acc.add(v - first));
    Some(first + acc.value() / T::from_usize(values.len())?)
}

/// Sample variance (n - 1 denominator). `None` for fewer than two values.
pub fn sample_variance<T: Scalar>(values: &[T]) -> Option<T> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let mut acc = CompensatedSum::new();
    for &v in values {
        let d = v - m;
        acc.add(d * d);
    }
    Some(acc.value() / T::from_usize(values.len() - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::<f64>::new();
        acc.add(1e16);
        acc.add(1.0);
        acc.add(-1e16);
        assert_eq!(acc.value(), 1.0);
    }

    #[test]
    fn variance_of_short_inputs() {
        assert_eq!(sample_variance(&[1.0f64]), None);
        assert_eq!(sample_variance(&[1.0f64, -1.0]), Some(2.0));
        assert_eq!(mean::<f32>(&[]), None);
    }
}
