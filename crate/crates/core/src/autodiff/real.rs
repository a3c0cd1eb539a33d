use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar abstraction shared by plain floats, second-order jets and tape
/// variables, so that flow and residual formulas are written once.
///
/// Only smooth primitives are exposed. `abs` and `max_value` branch on the
/// primal value and are meant for regions where the branch is constant.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;

    /// A constant living in the same context as `self` (same tape, same jet width).
    fn lift(&self, v: f64) -> Self;

    fn sqrt(self) -> Self;
    fn powf(self, e: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero_like(&self) -> Self {
        self.lift(0.0)
    }

    fn recip(self) -> Self {
        self.lift(1.0) / self
    }

    fn square(self) -> Self {
        self * self
    }

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn sigmoid(self) -> Self {
        let one = self.lift(1.0);
        one / ((-self).exp() + 1.0)
    }

    fn tanh(self) -> Self {
        let e = (self * 2.0).exp();
        (e - 1.0) / (e + 1.0)
    }
}

impl Real for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn lift(&self, v: f64) -> Self {
        v
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}
