//! Closed-form reference flows used as ground truth.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::rheology::RheologyModel;
use crate::autodiff::{DifferentiableField, Jet, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceFlow {
    Zero,
    Uniform {
        velocity: [f64; 3],
        pressure: f64,
    },
    /// u = u0 + A x + b t, p = p0 + c . (x, t).
    Linear {
        u0: [f64; 3],
        gradient: [[f64; 3]; 3],
        rate: [f64; 3],
        p0: f64,
        p_gradient: [f64; 4],
    },
    /// Steady power-law flow along x between walls y = ±half_height, driven
    /// by the pressure gradient -g [Ba/cm]; p = p_ref at x = 0.
    PlanePoiseuille {
        half_height: f64,
        g: f64,
        m: f64,
        n: f64,
        p_ref: f64,
    },
    /// Steady power-law flow along z in a pipe of the given radius.
    PipePoiseuille {
        radius: f64,
        g: f64,
        m: f64,
        n: f64,
        p_ref: f64,
    },
    /// u_z = s(t) W(r), with W the steady profile for gradient g0 and the
    /// periodic pulse s(t) = base + amplitude exp(kappa (cos(2 pi (t/T - peak)) - 1)).
    /// The pressure follows the quasi-steady gradient g0 s^n; the residual
    /// inertia rho W s' is carried by the source.
    PulsatilePipe {
        radius: f64,
        g0: f64,
        m: f64,
        n: f64,
        density: f64,
        period: f64,
        base: f64,
        amplitude: f64,
        kappa: f64,
        peak: f64,
        p_ref: f64,
    },
    /// u = (sin y cos t, 0, 0), p = cos x.
    Manufactured,
}

impl ReferenceFlow {
    pub fn plane_poiseuille(model: &RheologyModel, half_height: f64, g: f64) -> Self {
        ReferenceFlow::PlanePoiseuille {
            half_height,
            g,
            m: model.m,
            n: model.n,
            p_ref: 0.0,
        }
    }

    pub fn pipe_poiseuille(model: &RheologyModel, radius: f64, g: f64) -> Self {
        ReferenceFlow::PipePoiseuille {
            radius,
            g,
            m: model.m,
            n: model.n,
            p_ref: 0.0,
        }
    }

    /// Plane profile with the given centerline speed.
    pub fn plane_poiseuille_with_peak(model: &RheologyModel, half_height: f64, u_max: f64) -> Self {
        let n = model.n;
        // u_max = n/(n+1) (g/m)^(1/n) h^((n+1)/n)
        let g = model.m * (u_max * (n + 1.0) / n / half_height.powf((n + 1.0) / n)).powf(n);
        Self::plane_poiseuille(model, half_height, g)
    }

    /// Pipe profile with the given centerline speed.
    pub fn pipe_poiseuille_with_peak(model: &RheologyModel, radius: f64, u_max: f64) -> Self {
        let n = model.n;
        let g = 2.0 * model.m * (u_max * (n + 1.0) / n / radius.powf((n + 1.0) / n)).powf(n);
        Self::pipe_poiseuille(model, radius, g)
    }

    /// Pulse with a single sharp systolic peak at `peak` (fraction of the
    /// period) and a centerline speed ranging from `base` to `base + amplitude`
    /// times `u_max`.
    pub fn pulsatile_pipe(model: &RheologyModel, radius: f64, u_max: f64, period: f64, peak: f64) -> Self {
        let g0 = match Self::pipe_poiseuille_with_peak(model, radius, u_max) {
            ReferenceFlow::PipePoiseuille { g, .. } => g,
            _ => unreachable!("constructor returns a pipe"),
        };
        ReferenceFlow::PulsatilePipe {
            radius,
            g0,
            m: model.m,
            n: model.n,
            density: model.density,
            period,
            base: 0.2,
            amplitude: 0.8,
            kappa: 4.0,
            peak,
            p_ref: 0.0,
        }
    }

    /// Generic evaluation over any scalar type.
    pub fn eval_generic<R: Real>(&self, p: [R; 4]) -> [R; 4] {
        let zero = p[0].zero_like();
        match *self {
            ReferenceFlow::Zero => [zero; 4],
            ReferenceFlow::Uniform { velocity, pressure } => [
                zero + velocity[0],
                zero + velocity[1],
                zero + velocity[2],
                zero + pressure,
            ],
            ReferenceFlow::Linear {
                u0,
                gradient,
                rate,
                p0,
                p_gradient,
            } => {
                let u = |i: usize| {
                    let mut v = p[3] * rate[i] + u0[i];
                    for j in 0..3 {
                        v = v + p[j] * gradient[i][j];
                    }
                    v
                };
                let mut pr = zero + p0;
                for j in 0..4 {
                    pr = pr + p[j] * p_gradient[j];
                }
                [u(0), u(1), u(2), pr]
            }
            ReferenceFlow::PlanePoiseuille {
                half_height,
                g,
                m,
                n,
                p_ref,
            } => {
                let e = (n + 1.0) / n;
                let c = n / (n + 1.0) * (g / m).powf(1.0 / n);
                let u = (p[1].abs().powf(e) * -1.0 + half_height.powf(e)) * c;
                [u, zero, zero, p[0] * -g + p_ref]
            }
            ReferenceFlow::PipePoiseuille {
                radius,
                g,
                m,
                n,
                p_ref,
            } => {
                let w = pipe_profile(p[0], p[1], radius, g, m, n);
                [zero, zero, w, p[2] * -g + p_ref]
            }
            ReferenceFlow::PulsatilePipe {
                radius,
                g0,
                m,
                n,
                period,
                base,
                amplitude,
                kappa,
                peak,
                p_ref,
                ..
            } => {
                let s = pulse(p[3], period, base, amplitude, kappa, peak);
                let w = pipe_profile(p[0], p[1], radius, g0, m, n) * s;
                let grad = s.powf(n) * g0;
                [zero, zero, w, grad * p[2] * -1.0 + p_ref]
            }
            ReferenceFlow::Manufactured => {
                let u = p[1].sin() * p[3].cos();
                [u, zero, zero, p[0].cos()]
            }
        }
    }

    /// Body force for which the flow solves the forced momentum equation
    /// exactly, written out by hand.
    pub fn source(&self, p: [f64; 4], model: &RheologyModel) -> [f64; 3] {
        match *self {
            ReferenceFlow::PulsatilePipe {
                radius,
                g0,
                m,
                n,
                density,
                period,
                base,
                amplitude,
                kappa,
                peak,
                ..
            } => {
                let w = pipe_profile(p[0], p[1], radius, g0, m, n);
                let t = Jet::variable(p[3], 0);
                let s = pulse(t, period, base, amplitude, kappa, peak);
                [0.0, 0.0, density * w * s.grad[0]]
            }
            ReferenceFlow::Manufactured => {
                let (x, y, t) = (p[0], p[1], p[3]);
                let c = (y.cos() * t.cos()).abs();
                let visc = if c > model.gamma_min {
                    model.m * model.n * c.powf(model.n - 1.0) * y.sin() * t.cos()
                } else {
                    model.m * model.gamma_min.powf(model.n - 1.0) * y.sin() * t.cos()
                };
                [-model.density * y.sin() * t.sin() - x.sin() + visc, 0.0, 0.0]
            }
            ReferenceFlow::Linear { .. } | ReferenceFlow::Uniform { .. } => {
                let b = crate::autodiff::evaluate_with_derivatives(self, p).expect("smooth flow");
                let g = |i: usize, j: usize| b.jacobian[i][j];
                std::array::from_fn(|i| {
                    let conv: f64 = (0..3).map(|j| b.value[j] * g(i, j)).sum();
                    model.density * (g(i, 3) + conv) + b.jacobian[3][i]
                })
            }
            ReferenceFlow::Zero | ReferenceFlow::PlanePoiseuille { .. } | ReferenceFlow::PipePoiseuille { .. } => [0.0; 3],
        }
    }

    /// Pressure drop between inlet and outlet over an axial length, at time t.
    pub fn pressure_drop(&self, length: f64, t: f64) -> Option<f64> {
        match *self {
            ReferenceFlow::PlanePoiseuille { g, .. } | ReferenceFlow::PipePoiseuille { g, .. } => Some(g * length),
            ReferenceFlow::PulsatilePipe {
                g0,
                n,
                period,
                base,
                amplitude,
                kappa,
                peak,
                ..
            } => Some(g0 * pulse(t, period, base, amplitude, kappa, peak).powf(n) * length),
            _ => None,
        }
    }

    /// Volumetric flow rate through a cross section of the channel or pipe;
    /// for the slab this is per unit depth.
    pub fn flow_rate(&self, t: f64) -> Option<f64> {
        match *self {
            ReferenceFlow::PlanePoiseuille {
                half_height, g, m, n, ..
            } => {
                let e = (n + 1.0) / n;
                let c = n / (n + 1.0) * (g / m).powf(1.0 / n);
                // 2 c (h^e h - h^(e+1)/(e+1))
                Some(2.0 * c * half_height.powf(e + 1.0) * (1.0 - 1.0 / (e + 1.0)))
            }
            ReferenceFlow::PipePoiseuille { radius, g, m, n, .. } => Some(pipe_flow_rate(radius, g, m, n)),
            ReferenceFlow::PulsatilePipe {
                radius,
                g0,
                m,
                n,
                period,
                base,
                amplitude,
                kappa,
                peak,
                ..
            } => Some(pipe_flow_rate(radius, g0, m, n) * pulse(t, period, base, amplitude, kappa, peak)),
            _ => None,
        }
    }

    pub fn is_steady(&self) -> bool {
        match self {
            ReferenceFlow::PulsatilePipe { .. } | ReferenceFlow::Manufactured => false,
            ReferenceFlow::Linear { rate, p_gradient, .. } => rate.iter().all(|v| *v == 0.0) && p_gradient[3] == 0.0,
            _ => true,
        }
    }
}

/// n/(n+1) (g/(2m))^(1/n) (R^((n+1)/n) - r^((n+1)/n)).
fn pipe_profile<R: Real>(x: R, y: R, radius: f64, g: f64, m: f64, n: f64) -> R {
    let e = (n + 1.0) / n;
    let c = n / (n + 1.0) * (g / (2.0 * m)).powf(1.0 / n);
    let r2 = x * x + y * y;
    (r2.powf(0.5 * e) * -1.0 + radius.powf(e)) * c
}

/// pi n/(3n+1) (g/(2m))^(1/n) R^((3n+1)/n).
pub fn pipe_flow_rate(radius: f64, g: f64, m: f64, n: f64) -> f64 {
    PI * n / (3.0 * n + 1.0) * (g / (2.0 * m)).powf(1.0 / n) * radius.powf((3.0 * n + 1.0) / n)
}

fn pulse<R: Real>(t: R, period: f64, base: f64, amplitude: f64, kappa: f64, peak: f64) -> R {
    let phase = (t / period - peak) * (2.0 * PI);
    ((phase.cos() - 1.0) * kappa).exp() * amplitude + base
}

impl DifferentiableField for ReferenceFlow {
    fn eval(&self, point: [f64; 4]) -> [f64; 4] {
        self.eval_generic(point)
    }

    fn eval_jets(&self, point: [f64; 4]) -> [Jet; 4] {
        self.eval_generic(Jet::seed(point))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::residual::momentum_residual;

    #[test]
    fn peak_constructors_hit_the_requested_speed() {
        let model = RheologyModel::from_hematocrit(20.0).unwrap();
        let f = ReferenceFlow::plane_poiseuille_with_peak(&model, 1.0, 30.0);
        assert!((f.eval([1.0, 0.0, 0.0, 0.0])[0] - 30.0).abs() < 1e-12);
        let f = ReferenceFlow::pipe_poiseuille_with_peak(&model, 0.5, 50.0);
        assert!((f.eval([0.0, 0.0, 1.0, 0.0])[2] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn pulsatile_source_balances_inertia() {
        let model = RheologyModel::from_hematocrit(45.0).unwrap();
        let f = ReferenceFlow::pulsatile_pipe(&model, 0.5, 40.0, 0.8, 0.3);
        for &p in &[[0.1, 0.2, 1.0, 0.1], [0.0, -0.3, 2.0, 0.25], [0.2, 0.1, 0.5, 0.7]] {
            let s = f.source(p, &model);
            let r = momentum_residual(&f, &model, p, Some(s)).unwrap();
            for v in r.momentum {
                assert!(v.abs() < 1e-8, "{:?}", r.momentum);
            }
            assert!(r.continuity.abs() < 1e-12);
        }
    }

    #[test]
    fn flow_rate_formula_matches_radial_integral() {
        let model = RheologyModel::from_hematocrit(57.5).unwrap();
        let f = ReferenceFlow::pipe_poiseuille_with_peak(&model, 0.7, 25.0);
        let n = 20_000;
        let dr = 0.7 / n as f64;
        let q: f64 = (0..n)
            .map(|k| {
                let r = (k as f64 + 0.5) * dr;
                2.0 * PI * r * f.eval([r, 0.0, 0.0, 0.0])[2] * dr
            })
            .sum();
        assert!((q / f.flow_rate(0.0).unwrap() - 1.0).abs() < 1e-6);
    }
}
