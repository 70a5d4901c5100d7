//! Floating-point scalar abstraction shared by every numeric type in the crate.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar used for couplings, fields and energies.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Machine epsilon of the type, as `f64`.
    const EPS: f64;

    /// Lossy conversion from `f64`; total for finite inputs.
    fn c(x: f64) -> Self;

    fn f64(self) -> f64;

    fn int(x: i64) -> Self {
        Self::c(x as f64)
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EPS: f64 = <$t>::EPSILON as f64;

            #[inline]
            fn c(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Neumaier compensated accumulator. Summation order is the caller's.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum<T: Scalar> {
    sum: T,
    comp: T,
}

impl<T: Scalar> KahanSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

impl<T: Scalar> Extend<T> for KahanSum<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of an iterator in iteration order.
pub fn ksum<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> T {
    let mut k = KahanSum::new();
    k.extend(iter);
    k.value()
}
