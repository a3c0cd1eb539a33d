//! Loss terms with parameter gradients. Every function returns the
//! unweighted term and, when asked, adds `factor` times its gradient to a
//! caller-owned buffer.

use crate::autodiff::JET_LEN;
use crate::error::{Error, Result};
use crate::network::{NeuralField, Order, ScaleSet, Workspace};
use crate::physics::{residual_channel_jacobian, RheologyModel};
use crate::qmc::Point4;

/// Reference magnitudes that make each term dimensionless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossScales {
    pub velocity: f64,
    pub pressure: f64,
    pub momentum: f64,
    pub continuity: f64,
}

impl LossScales {
    /// Velocity U, pressure p0, momentum p0 / L and continuity U / L.
    pub fn from_scales(s: &ScaleSet) -> Self {
        LossScales {
            velocity: s.velocity,
            pressure: s.pressure,
            momentum: s.pressure / s.length,
            continuity: s.velocity / s.length,
        }
    }

    fn channel(&self, ch: usize) -> f64 {
        if ch < 3 {
            self.momentum
        } else {
            self.continuity
        }
    }
}

/// Gradient sink: `factor` times the gradient is added to the buffer.
pub type GradSink<'a> = Option<(f64, &'a mut [f64])>;

/// Reusable per-point workspaces.
#[derive(Default)]
pub struct Scratch {
    pool: Vec<Workspace>,
}

impl Scratch {
    fn ensure(&mut self, n: usize) {
        if self.pool.len() < n {
            self.pool.resize_with(n, Workspace::default);
        }
    }
}

/// One voxel observation: the lumen quadrature points of the voxel, the
/// total number of points drawn, and the measured mean velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsTarget {
    pub points: Vec<Point4>,
    pub total: usize,
    pub value: [f64; 3],
}

/// A pressure average over a set of points against a target value.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureTarget {
    pub points: Vec<Point4>,
    pub value: f64,
}

fn value_bar(k: usize, v: f64) -> [[f64; JET_LEN]; 4] {
    let mut bar = [[0.0; JET_LEN]; 4];
    bar[k][0] = v;
    bar
}

/// Mean over voxels of |(W u - u_obs) / U|^2.
pub fn observation_loss(
    net: &NeuralField,
    scratch: &mut Scratch,
    targets: &[ObsTarget],
    scales: &LossScales,
    grad: GradSink<'_>,
) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::invalid("observation batch is empty"));
    }
    let n = targets.len() as f64;
    let u2 = scales.velocity * scales.velocity;
    let mut total = 0.0;
    let mut sink = grad;
    for t in targets {
        if t.total == 0 {
            return Err(Error::invalid("observation target with no quadrature points"));
        }
        scratch.ensure(t.points.len());
        let mut pred = [0.0; 3];
        for (p, ws) in t.points.iter().zip(scratch.pool.iter_mut()) {
            net.forward(*p, Order::Value, ws);
            let v = net.values(ws);
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::Diverged { point: *p });
            }
            for k in 0..3 {
                pred[k] += v[k];
            }
        }
        let r: [f64; 3] = std::array::from_fn(|k| pred[k] / t.total as f64 - t.value[k]);
        total += (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) / u2;
        if let Some((factor, g)) = sink.as_mut() {
            let mut bar = [[0.0; JET_LEN]; 4];
            for k in 0..3 {
                bar[k][0] = *factor * 2.0 * r[k] / (u2 * n * t.total as f64);
            }
            for ws in scratch.pool.iter_mut().take(t.points.len()) {
                net.backward(ws, &bar, g);
            }
        }
    }
    Ok(total / n)
}

/// Mean over regions of ((mean p - target) / p0)^2.
pub fn pressure_loss(
    net: &NeuralField,
    scratch: &mut Scratch,
    targets: &[PressureTarget],
    scales: &LossScales,
    grad: GradSink<'_>,
) -> Result<f64> {
    if targets.is_empty() {
        return Ok(0.0);
    }
    let n = targets.len() as f64;
    let p2 = scales.pressure * scales.pressure;
    let mut total = 0.0;
    let mut sink = grad;
    for t in targets {
        if t.points.is_empty() {
            return Err(Error::invalid("pressure target with no points"));
        }
        let m = t.points.len() as f64;
        scratch.ensure(t.points.len());
        let mut mean = 0.0;
        for (p, ws) in t.points.iter().zip(scratch.pool.iter_mut()) {
            net.forward(*p, Order::Value, ws);
            let v = net.values(ws)[3];
            if !v.is_finite() {
                return Err(Error::Diverged { point: *p });
            }
            mean += v;
        }
        let r = mean / m - t.value;
        total += r * r / p2;
        if let Some((factor, g)) = sink.as_mut() {
            let bar = value_bar(3, *factor * 2.0 * r / (p2 * n * m));
            for ws in scratch.pool.iter_mut().take(t.points.len()) {
                net.backward(ws, &bar, g);
            }
        }
    }
    Ok(total / n)
}

/// Mean over points of |u / U|^2.
pub fn boundary_loss(
    net: &NeuralField,
    scratch: &mut Scratch,
    points: &[Point4],
    scales: &LossScales,
    grad: GradSink<'_>,
) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    scratch.ensure(1);
    let ws = &mut scratch.pool[0];
    let n = points.len() as f64;
    let u2 = scales.velocity * scales.velocity;
    let mut total = 0.0;
    let mut sink = grad;
    for p in points {
        net.forward(*p, Order::Value, ws);
        let v = net.values(ws);
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Diverged { point: *p });
        }
        total += (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / u2;
        if let Some((factor, g)) = sink.as_mut() {
            let mut bar = [[0.0; JET_LEN]; 4];
            for k in 0..3 {
                bar[k][0] = *factor * 2.0 * v[k] / (u2 * n);
            }
            net.backward(ws, &bar, g);
        }
    }
    Ok(total / n)
}

/// Where the physics gradient goes.
pub enum PhysicsGrad<'a> {
    None,
    /// Gradient of sum_c weights[c] * L_c added to one buffer.
    Combined { weights: [f64; 4], grad: &'a mut [f64] },
    /// Gradient of each unweighted channel into its own buffer.
    PerChannel(&'a mut [Vec<f64>; 4]),
}

pub struct PhysicsOutcome {
    /// Mean squared scaled residual of x, y, z momentum and continuity.
    pub values: [f64; 4],
    /// |momentum| + |continuity| per point, in physical units.
    pub magnitudes: Vec<f64>,
}

pub type Source<'a> = Option<&'a dyn Fn(Point4) -> [f64; 3]>;

pub fn physics_loss(
    net: &NeuralField,
    scratch: &mut Scratch,
    model: &RheologyModel,
    points: &[Point4],
    source: Source<'_>,
    scales: &LossScales,
    mut grad: PhysicsGrad<'_>,
) -> Result<PhysicsOutcome> {
    let mut out = PhysicsOutcome {
        values: [0.0; 4],
        magnitudes: Vec::with_capacity(points.len()),
    };
    if points.is_empty() {
        return Ok(out);
    }
    scratch.ensure(1);
    let ws = &mut scratch.pool[0];
    let n = points.len() as f64;
    let inv: [f64; 4] = std::array::from_fn(|c| 1.0 / (scales.channel(c) * scales.channel(c)));
    for p in points {
        net.forward(*p, Order::Second, ws);
        let jets = net.jets(ws);
        if !jets.iter().all(|j| j.is_finite()) {
            return Err(Error::Diverged { point: *p });
        }
        let f = source.map(|s| s(*p)).unwrap_or([0.0; 3]);
        let cj = residual_channel_jacobian(&jets, model, f);
        let r = cj.residual;
        if !r.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { point: *p });
        }
        for c in 0..4 {
            out.values[c] += r[c] * r[c] * inv[c];
        }
        out.magnitudes.push((r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt() + r[3].abs());
        let bar_for = |w: [f64; 4]| {
            let mut bar = [[0.0; JET_LEN]; 4];
            for c in 0..4 {
                let s = w[c] * 2.0 * r[c] * inv[c] / n;
                if s == 0.0 {
                    continue;
                }
                for o in 0..4 {
                    for k in 0..JET_LEN {
                        bar[o][k] += s * cj.jacobian[c][o][k];
                    }
                }
            }
            bar
        };
        match &mut grad {
            PhysicsGrad::None => {}
            PhysicsGrad::Combined { weights, grad } => {
                let bar = bar_for(*weights);
                net.backward(ws, &bar, grad);
            }
            PhysicsGrad::PerChannel(bufs) => {
                for c in 0..4 {
                    let mut w = [0.0; 4];
                    w[c] = 1.0;
                    let bar = bar_for(w);
                    net.backward(ws, &bar, &mut bufs[c]);
                }
            }
        }
    }
    for v in out.values.iter_mut() {
        *v /= n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, NetworkArchitecture};

    fn tiny() -> NeuralField {
        let scales = ScaleSet {
            length: 2.0,
            shift: [0.5, 0.0, 0.0],
            frequency: 1.0,
            t_min: 0.0,
            velocity: 10.0,
            pressure: 100.0,
        };
        init_network(NetworkArchitecture::new(2, 6, 3), scales).unwrap()
    }

    fn pts(n: usize, salt: f64) -> Vec<Point4> {
        (0..n)
            .map(|i| {
                let s = i as f64 + salt;
                [(0.7 * s).sin(), (1.3 * s).cos() * 0.5, 0.2 * (0.4 * s).sin(), 0.1 * s]
            })
            .collect()
    }

    fn obs_targets() -> Vec<ObsTarget> {
        vec![
            ObsTarget {
                points: pts(5, 0.1),
                total: 8,
                value: [1.0, -2.0, 0.5],
            },
            ObsTarget {
                points: pts(3, 7.0),
                total: 3,
                value: [0.0, 3.0, -1.0],
            },
        ]
    }

    fn check_gradient<F: Fn(&NeuralField, GradSink<'_>) -> f64>(net: &NeuralField, f: F) {
        let mut g = vec![0.0; net.parameter_count()];
        f(net, Some((1.0, &mut g)));
        let mut probe = net.clone();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in (0..net.parameter_count()).step_by(3) {
            let base = net.parameters()[i];
            probe.parameters_mut()[i] = base + h;
            let up = f(&probe, None);
            probe.parameters_mut()[i] = base - h;
            let dn = f(&probe, None);
            probe.parameters_mut()[i] = base;
            let fd = (up - dn) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / (fd.abs().max(1e-2 * scale)));
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn observation_gradient() {
        let net = tiny();
        let sc = LossScales::from_scales(net.scales());
        let t = obs_targets();
        check_gradient(&net, |n, g| observation_loss(n, &mut Scratch::default(), &t, &sc, g).unwrap());
    }

    #[test]
    fn pressure_gradient() {
        let net = tiny();
        let sc = LossScales::from_scales(net.scales());
        let t = vec![PressureTarget {
            points: pts(7, 0.3),
            value: 12.0,
        }];
        check_gradient(&net, |n, g| pressure_loss(n, &mut Scratch::default(), &t, &sc, g).unwrap());
    }

    #[test]
    fn boundary_gradient() {
        let net = tiny();
        let sc = LossScales::from_scales(net.scales());
        let p = pts(9, 2.0);
        check_gradient(&net, |n, g| boundary_loss(n, &mut Scratch::default(), &p, &sc, g).unwrap());
    }

    #[test]
    fn physics_gradients_per_channel() {
        let net = tiny();
        let sc = LossScales::from_scales(net.scales());
        let model = RheologyModel::from_hematocrit(45.0).unwrap();
        let p = pts(6, 0.9);
        let src = |q: Point4| [q[1], 0.5 * q[0], 0.0];
        let src_ref: &dyn Fn(Point4) -> [f64; 3] = &src;
        for c in 0..4 {
            check_gradient(&net, |n, g| {
                let run = |gr: PhysicsGrad<'_>| {
                    physics_loss(n, &mut Scratch::default(), &model, &p, Some(src_ref), &sc, gr).unwrap().values[c]
                };
                match g {
                    None => run(PhysicsGrad::None),
                    Some((f, buf)) => {
                        let mut w = [0.0; 4];
                        w[c] = f;
                        run(PhysicsGrad::Combined { weights: w, grad: buf })
                    }
                }
            });
        }
        let mut per: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; net.parameter_count()]);
        physics_loss(&net, &mut Scratch::default(), &model, &p, Some(src_ref), &sc, PhysicsGrad::PerChannel(&mut per)).unwrap();
        let w = [0.3, 2.0, 1.0, 5.0];
        let mut comb = vec![0.0; net.parameter_count()];
        physics_loss(&net, &mut Scratch::default(), &model, &p, Some(src_ref), &sc, PhysicsGrad::Combined { weights: w, grad: &mut comb }).unwrap();
        for i in 0..comb.len() {
            let sum: f64 = (0..4).map(|c| w[c] * per[c][i]).sum();
            assert!((sum - comb[i]).abs() <= 1e-10 * (1.0 + sum.abs()));
        }
    }

    #[test]
    fn closed_forms() {
        let net = tiny();
        let sc = LossScales::from_scales(net.scales());
        let mut zero = net.clone();
        zero.parameters_mut().iter_mut().for_each(|v| *v = 0.0);
        let t = obs_targets();
        let got = observation_loss(&zero, &mut Scratch::default(), &t, &sc, None).unwrap();
        let want = (1.0 + 4.0 + 0.25 + 9.0 + 1.0) / 100.0 / 2.0;
        assert!((got - want).abs() < 1e-15);
        assert_eq!(boundary_loss(&zero, &mut Scratch::default(), &pts(4, 0.0), &sc, None).unwrap(), 0.0);
        assert!(observation_loss(&zero, &mut Scratch::default(), &[], &sc, None).is_err());
    }

    #[test]
    fn exact_solution_has_no_physics_loss() {
        // a field that is exactly representable: zero velocity, constant pressure
        let net = tiny();
        let mut flat = net.clone();
        flat.parameters_mut().iter_mut().for_each(|v| *v = 0.0);
        let k = flat.parameter_count();
        flat.parameters_mut()[k - 1] = 0.37;
        let sc = LossScales::from_scales(flat.scales());
        let model = RheologyModel::from_hematocrit(20.0).unwrap();
        let out = physics_loss(&flat, &mut Scratch::default(), &model, &pts(10, 0.0), None, &sc, PhysicsGrad::None).unwrap();
        assert_eq!(out.values, [0.0; 4]);
    }
}
