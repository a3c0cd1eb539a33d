use super::jet::{Jet, INPUTS};
use crate::error::{Error, Result};

/// A smooth map from a space-time point (x, y, z [cm], t [s]) to
/// (u, v, w [cm/s], p [Ba]).
pub trait DifferentiableField {
    fn eval(&self, point: [f64; 4]) -> [f64; 4];

    /// Outputs together with first and second derivatives in all four inputs.
    fn eval_jets(&self, point: [f64; 4]) -> [Jet; 4];
}

impl<F: DifferentiableField + ?Sized> DifferentiableField for &F {
    fn eval(&self, point: [f64; 4]) -> [f64; 4] {
        (**self).eval(point)
    }
    fn eval_jets(&self, point: [f64; 4]) -> [Jet; 4] {
        (**self).eval_jets(point)
    }
}

impl<F: DifferentiableField + ?Sized> DifferentiableField for Box<F> {
    fn eval(&self, point: [f64; 4]) -> [f64; 4] {
        (**self).eval(point)
    }
    fn eval_jets(&self, point: [f64; 4]) -> [Jet; 4] {
        (**self).eval_jets(point)
    }
}

/// Value, Jacobian and full second-derivative tensor of the four outputs.
///
/// `jacobian[o][i]` is d(out o)/d(input i); `second[o][i][j]` the matching
/// second derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeBundle {
    pub value: [f64; 4],
    pub jacobian: [[f64; 4]; 4],
    pub second: [[[f64; 4]; 4]; 4],
}

impl DerivativeBundle {
    pub fn from_jets(jets: &[Jet; 4]) -> Self {
        let mut b = DerivativeBundle {
            value: [0.0; 4],
            jacobian: [[0.0; 4]; 4],
            second: [[[0.0; 4]; 4]; 4],
        };
        for (o, jet) in jets.iter().enumerate() {
            b.value[o] = jet.val;
            b.jacobian[o] = jet.grad;
            for i in 0..INPUTS {
                for j in 0..INPUTS {
                    b.second[o][i][j] = jet.second(i, j);
                }
            }
        }
        b
    }

    pub fn is_finite(&self) -> bool {
        self.value.iter().all(|v| v.is_finite())
            && self.jacobian.iter().flatten().all(|v| v.is_finite())
            && self.second.iter().flatten().flatten().all(|v| v.is_finite())
    }

    /// Largest relative deviation between two bundles, per entry, with
    /// `floor` guarding entries that are near zero in both.
    pub fn max_relative_difference(&self, other: &Self, floor: f64) -> f64 {
        let pairs = self
            .value
            .iter()
            .zip(&other.value)
            .chain(self.jacobian.iter().flatten().zip(other.jacobian.iter().flatten()))
            .chain(
                self.second
                    .iter()
                    .flatten()
                    .flatten()
                    .zip(other.second.iter().flatten().flatten()),
            );
        pairs
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}

pub fn evaluate_with_derivatives<F: DifferentiableField + ?Sized>(
    field: &F,
    point: [f64; 4],
) -> Result<DerivativeBundle> {
    let bundle = DerivativeBundle::from_jets(&field.eval_jets(point));
    if bundle.is_finite() {
        Ok(bundle)
    } else {
        Err(Error::Diverged { point })
    }
}

/// Central-difference estimate of the quantities in [`DerivativeBundle`].
pub fn finite_difference_probe<F: DifferentiableField + ?Sized>(
    field: &F,
    point: [f64; 4],
    step: f64,
) -> Result<DerivativeBundle> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!("finite-difference step {step}")));
    }
    let h = step;
    let shifted = |moves: &[(usize, f64)]| {
        let mut p = point;
        for &(axis, d) in moves {
            p[axis] += d;
        }
        field.eval(p)
    };
    let center = field.eval(point);
    let mut b = DerivativeBundle {
        value: center,
        jacobian: [[0.0; 4]; 4],
        second: [[[0.0; 4]; 4]; 4],
    };
    for i in 0..INPUTS {
        let fp = shifted(&[(i, h)]);
        let fm = shifted(&[(i, -h)]);
        for o in 0..4 {
            b.jacobian[o][i] = (fp[o] - fm[o]) / (2.0 * h);
            b.second[o][i][i] = (fp[o] - 2.0 * center[o] + fm[o]) / (h * h);
        }
        for j in i + 1..INPUTS {
            let fpp = shifted(&[(i, h), (j, h)]);
            let fpm = shifted(&[(i, h), (j, -h)]);
            let fmp = shifted(&[(i, -h), (j, h)]);
            let fmm = shifted(&[(i, -h), (j, -h)]);
            for o in 0..4 {
                let d = (fpp[o] - fpm[o] - fmp[o] + fmm[o]) / (4.0 * h * h);
                b.second[o][i][j] = d;
                b.second[o][j][i] = d;
            }
        }
    }
    if b.is_finite() {
        Ok(b)
    } else {
        Err(Error::NonFinite(format!(
            "finite-difference probe at {point:?} with step {step}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Real;

    struct Square;
    impl DifferentiableField for Square {
        fn eval(&self, p: [f64; 4]) -> [f64; 4] {
            [p[0] * p[0], 0.0, 0.0, 0.0]
        }
        fn eval_jets(&self, p: [f64; 4]) -> [Jet; 4] {
            let [x, ..] = Jet::seed(p);
            let z = Jet::constant(0.0);
            [x * x, z, z, z]
        }
    }

    struct Sine;
    impl DifferentiableField for Sine {
        fn eval(&self, p: [f64; 4]) -> [f64; 4] {
            [p[0].sin(), 0.0, 0.0, 0.0]
        }
        fn eval_jets(&self, p: [f64; 4]) -> [Jet; 4] {
            let [x, ..] = Jet::seed(p);
            let z = Jet::constant(0.0);
            [x.sin(), z, z, z]
        }
    }

    struct Blowup;
    impl DifferentiableField for Blowup {
        fn eval(&self, p: [f64; 4]) -> [f64; 4] {
            [1.0 / p[0], 0.0, 0.0, 0.0]
        }
        fn eval_jets(&self, p: [f64; 4]) -> [Jet; 4] {
            let [x, ..] = Jet::seed(p);
            let z = Jet::constant(0.0);
            [x.recip(), z, z, z]
        }
    }

    #[test]
    fn square_derivatives() {
        let b = evaluate_with_derivatives(&Square, [3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(b.jacobian[0][0], 6.0);
        assert_eq!(b.second[0][0][0], 2.0);
    }

    #[test]
    fn probe_on_square_and_sine() {
        let b = finite_difference_probe(&Square, [3.0, 0.0, 0.0, 0.0], 1e-3).unwrap();
        assert!((b.second[0][0][0] - 2.0).abs() < 1e-6);
        let s = finite_difference_probe(&Sine, [0.0; 4], 1e-4).unwrap();
        assert!((s.jacobian[0][0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn divergence_is_reported_with_point() {
        match evaluate_with_derivatives(&Blowup, [0.0, 1.0, 2.0, 3.0]) {
            Err(Error::Diverged { point }) => assert_eq!(point, [0.0, 1.0, 2.0, 3.0]),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn probe_rejects_bad_steps() {
        assert!(finite_difference_probe(&Square, [0.0; 4], 0.0).is_err());
        assert!(finite_difference_probe(&Square, [0.0; 4], -1.0).is_err());
        assert!(finite_difference_probe(&Blowup, [0.0; 4], 1e-3).is_err());
    }
}
