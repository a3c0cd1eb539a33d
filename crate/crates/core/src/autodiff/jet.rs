//! Second-order forward-mode numbers over the four space-time inputs.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::real::Real;

/// Number of independent inputs (x, y, z, t).
pub const INPUTS: usize = 4;
/// Packed upper-triangular Hessian length for four inputs.
pub const HESS_LEN: usize = 10;
/// Total number of stored coefficients per jet: value, gradient, packed Hessian.
pub const JET_LEN: usize = 1 + INPUTS + HESS_LEN;

/// Packed position of the symmetric Hessian entry (i, j).
pub const HESS_INDEX: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 4, 5, 6], [2, 5, 7, 8], [3, 6, 8, 9]];

/// The (i, j) pair stored at each packed Hessian slot, i <= j.
pub const HESS_PAIRS: [(usize, usize); HESS_LEN] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

/// Value, gradient and Hessian of a scalar with respect to (x, y, z, t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub val: f64,
    pub grad: [f64; INPUTS],
    pub hess: [f64; HESS_LEN],
}

impl Jet {
    pub fn constant(val: f64) -> Self {
        Jet {
            val,
            grad: [0.0; INPUTS],
            hess: [0.0; HESS_LEN],
        }
    }

    /// The independent variable number `axis` at value `val`.
    pub fn variable(val: f64, axis: usize) -> Self {
        let mut j = Jet::constant(val);
        j.grad[axis] = 1.0;
        j
    }

    /// Seeds all four inputs of a space-time point.
    pub fn seed(point: [f64; 4]) -> [Jet; 4] {
        [
            Jet::variable(point[0], 0),
            Jet::variable(point[1], 1),
            Jet::variable(point[2], 2),
            Jet::variable(point[3], 3),
        ]
    }

    #[inline]
    pub fn second(&self, i: usize, j: usize) -> f64 {
        self.hess[HESS_INDEX[i][j]]
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.val`.
    #[inline]
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Jet::constant(f0);
        for i in 0..INPUTS {
            out.grad[i] = f1 * self.grad[i];
        }
        for (k, &(i, j)) in HESS_PAIRS.iter().enumerate() {
            out.hess[k] = f2 * self.grad[i] * self.grad[j] + f1 * self.hess[k];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.val.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
    }

    /// Flattened coefficients in the order value, gradient, packed Hessian.
    pub fn to_array(&self) -> [f64; JET_LEN] {
        let mut a = [0.0; JET_LEN];
        a[0] = self.val;
        a[1..1 + INPUTS].copy_from_slice(&self.grad);
        a[1 + INPUTS..].copy_from_slice(&self.hess);
        a
    }

    pub fn from_array(a: &[f64; JET_LEN]) -> Self {
        let mut j = Jet::constant(a[0]);
        j.grad.copy_from_slice(&a[1..1 + INPUTS]);
        j.hess.copy_from_slice(&a[1 + INPUTS..]);
        j
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.val *= s;
        out.grad.iter_mut().for_each(|g| *g *= s);
        out.hess.iter_mut().for_each(|h| *h *= s);
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: Jet) -> Jet {
        self.val += rhs.val;
        for i in 0..INPUTS {
            self.grad[i] += rhs.grad[i];
        }
        for k in 0..HESS_LEN {
            self.hess[k] += rhs.hess[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: Jet) -> Jet {
        self.val -= rhs.val;
        for i in 0..INPUTS {
            self.grad[i] -= rhs.grad[i];
        }
        for k in 0..HESS_LEN {
            self.hess[k] -= rhs.hess[k];
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::constant(self.val * rhs.val);
        for i in 0..INPUTS {
            out.grad[i] = self.val * rhs.grad[i] + rhs.val * self.grad[i];
        }
        for (k, &(i, j)) in HESS_PAIRS.iter().enumerate() {
            out.hess[k] = self.val * rhs.hess[k]
                + rhs.val * self.hess[k]
                + self.grad[i] * rhs.grad[j]
                + self.grad[j] * rhs.grad[i];
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: f64) -> Jet {
        self.val += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: f64) -> Jet {
        self.val -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

impl Real for Jet {
    #[inline]
    fn value(&self) -> f64 {
        self.val
    }
    #[inline]
    fn lift(&self, v: f64) -> Self {
        Jet::constant(v)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.val))
    }
    fn powf(self, e: f64) -> Self {
        let x = self.val;
        self.chain(
            x.powf(e),
            e * x.powf(e - 1.0),
            e * (e - 1.0) * x.powf(e - 2.0),
        )
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let x = self.val;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }
    fn sin(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(c, -s, -c)
    }
    fn recip(self) -> Self {
        let x = self.val;
        let r = 1.0 / x;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_of_x() {
        let [x, ..] = Jet::seed([3.0, 0.0, 0.0, 0.0]);
        let u = x * x;
        assert_eq!(u.val, 9.0);
        assert_eq!(u.grad[0], 6.0);
        assert_eq!(u.second(0, 0), 2.0);
        assert_eq!(u.second(0, 1), 0.0);
    }

    #[test]
    fn constant_has_no_derivatives() {
        let c = Jet::constant(4.2);
        let u = c * c + 1.0;
        assert!(u.grad.iter().all(|g| *g == 0.0));
        assert!(u.hess.iter().all(|h| *h == 0.0));
    }

    #[test]
    fn mixed_partial_of_product() {
        let [x, y, _, t] = Jet::seed([0.7, -1.3, 0.2, 0.5]);
        let u = x * y.sin() * t.exp();
        let expect_xy = y.val.cos() * t.val.exp();
        assert!((u.second(0, 1) - expect_xy).abs() < 1e-15);
        assert_eq!(u.second(0, 1), u.second(1, 0));
        let expect_yt = x.val * y.val.cos() * t.val.exp();
        assert!((u.second(1, 3) - expect_yt).abs() < 1e-15);
    }

    #[test]
    fn quotient_and_power_rules() {
        let [x, ..] = Jet::seed([2.0, 0.0, 0.0, 0.0]);
        let q = x.recip();
        assert!((q.grad[0] + 0.25).abs() < 1e-15);
        assert!((q.second(0, 0) - 0.25).abs() < 1e-15);
        let p = x.powf(2.5);
        assert!((p.grad[0] - 2.5 * 2f64.powf(1.5)).abs() < 1e-12);
        assert!((p.second(0, 0) - 2.5 * 1.5 * 2f64.powf(0.5)).abs() < 1e-12);
        let s = x.sqrt();
        let s2 = x.powf(0.5);
        assert!((s.second(0, 0) - s2.second(0, 0)).abs() < 1e-15);
    }

    #[test]
    fn array_round_trip() {
        let [x, y, z, t] = Jet::seed([0.1, 0.2, 0.3, 0.4]);
        let u = x * y * z * t + x.sin();
        assert_eq!(Jet::from_array(&u.to_array()), u);
    }
}
