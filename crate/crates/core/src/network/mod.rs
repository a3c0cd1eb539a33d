//! Fully connected Swish network mapping scaled (x, t) to scaled (u, p).

mod checkpoint;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{DifferentiableField, Jet, Real, HESS_PAIRS, INPUTS, JET_LEN};
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};

pub const INPUT_DIM: usize = 4;
pub const OUTPUT_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkArchitecture {
    pub hidden_layers: usize,
    pub width: usize,
    pub seed: u64,
}

impl Default for NetworkArchitecture {
    fn default() -> Self {
        NetworkArchitecture {
            hidden_layers: 6,
            width: 256,
            seed: 0,
        }
    }
}

impl NetworkArchitecture {
    pub fn new(hidden_layers: usize, width: usize, seed: u64) -> Self {
        NetworkArchitecture {
            hidden_layers,
            width,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.width == 0 {
            return Err(Error::InvalidArchitecture(format!(
                "{} hidden layers of width {}",
                self.hidden_layers, self.width
            )));
        }
        Ok(())
    }

    /// Layer sizes from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![INPUT_DIM];
        s.extend(std::iter::repeat(self.width).take(self.hidden_layers));
        s.push(OUTPUT_DIM);
        s
    }

    pub fn parameter_count(&self) -> usize {
        self.sizes().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Characteristic scales used to make network inputs and outputs O(1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSet {
    /// Length scale L [cm].
    pub length: f64,
    /// Spatial shift [cm] subtracted before dividing by L.
    pub shift: [f64; 3],
    /// Heart rate f [Hz].
    pub frequency: f64,
    /// Cycle start [s].
    pub t_min: f64,
    /// Velocity scale U [cm/s].
    pub velocity: f64,
    /// Pressure scale p0 [Ba].
    pub pressure: f64,
}

impl Default for ScaleSet {
    fn default() -> Self {
        ScaleSet {
            length: 1.0,
            shift: [0.0; 3],
            frequency: 1.0,
            t_min: 0.0,
            velocity: 200.0,
            pressure: 1.86e5,
        }
    }
}

impl ScaleSet {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.length, self.frequency, self.velocity, self.pressure]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && self.shift.iter().all(|v| v.is_finite())
            && self.t_min.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("scales must be positive and finite: {self:?}")))
        }
    }

    /// Scales fitted to a bounding box: L is the mean edge length and the
    /// shift is the box center.
    pub fn for_box(lo: [f64; 3], hi: [f64; 3], frequency: f64, t_min: f64, velocity: f64, pressure: f64) -> Self {
        let length = (0..3).map(|d| hi[d] - lo[d]).sum::<f64>() / 3.0;
        ScaleSet {
            length,
            shift: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])],
            frequency,
            t_min,
            velocity,
            pressure,
        }
    }

    pub fn nondimensionalize_point(&self, p: [f64; 4]) -> [f64; 4] {
        [
            (p[0] - self.shift[0]) / self.length,
            (p[1] - self.shift[1]) / self.length,
            (p[2] - self.shift[2]) / self.length,
            self.frequency * (p[3] - self.t_min),
        ]
    }

    pub fn dimensionalize_point(&self, q: [f64; 4]) -> [f64; 4] {
        [
            q[0] * self.length + self.shift[0],
            q[1] * self.length + self.shift[1],
            q[2] * self.length + self.shift[2],
            q[3] / self.frequency + self.t_min,
        ]
    }

    pub fn nondimensionalize_output(&self, o: [f64; 4]) -> [f64; 4] {
        [
            o[0] / self.velocity,
            o[1] / self.velocity,
            o[2] / self.velocity,
            o[3] / self.pressure,
        ]
    }

    pub fn dimensionalize_output(&self, o: [f64; 4]) -> [f64; 4] {
        [
            o[0] * self.velocity,
            o[1] * self.velocity,
            o[2] * self.velocity,
            o[3] * self.pressure,
        ]
    }

    fn output_factor(&self, k: usize) -> f64 {
        if k < 3 {
            self.velocity
        } else {
            self.pressure
        }
    }

    /// d(scaled input)/d(physical input) per axis.
    fn input_slope(&self, axis: usize) -> f64 {
        if axis < 3 {
            1.0 / self.length
        } else {
            self.frequency
        }
    }
}

/// Swish value and its first three derivatives.
#[inline]
fn swish(z: f64) -> (f64, f64, f64, f64) {
    let s = 1.0 / (1.0 + (-z).exp());
    let g = s * (1.0 - s);
    let q = 1.0 - 2.0 * s;
    (
        z * s,
        s + z * g,
        g * (2.0 + z * q),
        g * (q * (3.0 + z * q) - 2.0 * z * g),
    )
}

/// How many Taylor coefficients are carried per unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// Values only.
    Value,
    /// Value, gradient and Hessian in (x, y, z, t).
    Second,
}

impl Order {
    fn comps(self) -> usize {
        match self {
            Order::Value => 1,
            Order::Second => JET_LEN,
        }
    }
}

/// Reusable buffers for one forward/backward pass through the network.
///
/// Activations are stored component-major: coefficient `c` of unit `i` in a
/// layer of width `w` lives at `c * w + i`.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    order: Option<Order>,
    /// acts[0] is the scaled input; acts[l] the output of hidden layer l.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
    /// Raw (scaled) network output.
    out: Vec<f64>,
    bar_a: Vec<f64>,
    bar_z: Vec<f64>,
}

#[derive(Debug)]
pub struct NeuralField {
    arch: NetworkArchitecture,
    theta: Vec<f64>,
    scales: ScaleSet,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    second_order_evals: AtomicU64,
}

impl Clone for NeuralField {
    fn clone(&self) -> Self {
        NeuralField {
            arch: self.arch,
            theta: self.theta.clone(),
            scales: self.scales,
            sizes: self.sizes.clone(),
            offsets: self.offsets.clone(),
            second_order_evals: AtomicU64::new(self.second_order_evals.load(Ordering::Relaxed)),
        }
    }
}

/// Kaiming-normal weights (fan-in, gain 1) and zero biases.
pub fn init_network(arch: NetworkArchitecture, scales: ScaleSet) -> Result<NeuralField> {
    arch.validate()?;
    scales.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(arch.seed);
    let mut theta = Vec::with_capacity(arch.parameter_count());
    for w in arch.sizes().windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt())
            .map_err(|e| Error::invalid(e.to_string()))?;
        theta.extend((0..fan_in * fan_out).map(|_| normal.sample(&mut rng)));
        theta.extend(std::iter::repeat(0.0).take(fan_out));
    }
    NeuralField::from_parameters(arch, scales, theta)
}

impl NeuralField {
    pub fn from_parameters(arch: NetworkArchitecture, scales: ScaleSet, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        scales.validate()?;
        if theta.len() != arch.parameter_count() {
            return Err(Error::InvalidArchitecture(format!(
                "{} parameters supplied, architecture needs {}",
                theta.len(),
                arch.parameter_count()
            )));
        }
        let sizes = arch.sizes();
        let mut offsets = vec![0];
        for w in sizes.windows(2) {
            let last = *offsets.last().unwrap_or(&0);
            offsets.push(last + w[0] * w[1] + w[1]);
        }
        Ok(NeuralField {
            arch,
            theta,
            scales,
            sizes,
            offsets,
            second_order_evals: AtomicU64::new(0),
        })
    }

    pub fn architecture(&self) -> NetworkArchitecture {
        self.arch
    }

    pub fn scales(&self) -> &ScaleSet {
        &self.scales
    }

    pub fn parameters(&self) -> &[f64] {
        &self.theta
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn set_parameters(&mut self, theta: &[f64]) {
        self.theta.copy_from_slice(theta);
    }

    pub fn parameter_count(&self) -> usize {
        self.theta.len()
    }

    /// Number of evaluations that carried second input derivatives.
    pub fn second_order_evaluations(&self) -> u64 {
        self.second_order_evals.load(Ordering::Relaxed)
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64], usize, usize) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let start = self.offsets[l];
        let w = &self.theta[start..start + n_in * n_out];
        let b = &self.theta[start + n_in * n_out..start + n_in * n_out + n_out];
        (w, b, n_in, n_out)
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn seed_input(&self, point: [f64; 4], order: Order) -> Vec<f64> {
        let q = self.scales.nondimensionalize_point(point);
        let comps = order.comps();
        let mut a = vec![0.0; comps * INPUT_DIM];
        a[..INPUT_DIM].copy_from_slice(&q);
        if order == Order::Second {
            for axis in 0..INPUTS {
                a[(1 + axis) * INPUT_DIM + axis] = self.scales.input_slope(axis);
            }
        }
        a
    }

    /// Runs the network on one physical point, keeping every intermediate in
    /// `ws` for a later [`NeuralField::backward`].
    pub fn forward(&self, point: [f64; 4], order: Order, ws: &mut Workspace) {
        if order == Order::Second {
            self.second_order_evals.fetch_add(1, Ordering::Relaxed);
        }
        let comps = order.comps();
        let nl = self.n_layers();
        ws.order = Some(order);
        ws.acts.resize(nl, Vec::new());
        ws.pre.resize(nl - 1, Vec::new());
        ws.acts[0] = self.seed_input(point, order);
        for l in 0..nl {
            let (w, b, n_in, n_out) = self.layer(l);
            let mut z = if l + 1 < nl {
                std::mem::take(&mut ws.pre[l])
            } else {
                std::mem::take(&mut ws.out)
            };
            z.clear();
            z.resize(comps * n_out, 0.0);
            let a = &ws.acts[l];
            for c in 0..comps {
                let ac = &a[c * n_in..(c + 1) * n_in];
                let zc = &mut z[c * n_out..(c + 1) * n_out];
                for (o, zo) in zc.iter_mut().enumerate() {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    *zo = dot(row, ac);
                }
                if c == 0 {
                    for (zo, bo) in zc.iter_mut().zip(b) {
                        *zo += bo;
                    }
                }
            }
            if l + 1 < nl {
                let mut next = std::mem::take(&mut ws.acts[l + 1]);
                activate(&z, n_out, order, &mut next);
                ws.acts[l + 1] = next;
                ws.pre[l] = z;
            } else {
                ws.out = z;
            }
        }
    }

    /// Physical outputs of the last forward pass as values.
    pub fn values(&self, ws: &Workspace) -> [f64; 4] {
        std::array::from_fn(|k| ws.out[k] * self.scales.output_factor(k))
    }

    /// Physical outputs of the last second-order forward pass as jets.
    pub fn jets(&self, ws: &Workspace) -> [Jet; 4] {
        debug_assert_eq!(ws.order, Some(Order::Second));
        std::array::from_fn(|k| {
            let mut a = [0.0; JET_LEN];
            for (c, slot) in a.iter_mut().enumerate() {
                *slot = ws.out[c * OUTPUT_DIM + k];
            }
            Jet::from_array(&a).scale(self.scales.output_factor(k))
        })
    }

    /// Accumulates into `grad` the parameter gradient of a scalar whose
    /// adjoint with respect to the physical outputs of the last forward pass
    /// is `out_bar`. `out_bar[k]` holds one coefficient for [`Order::Value`]
    /// and the packed jet layout for [`Order::Second`].
    pub fn backward(&self, ws: &mut Workspace, out_bar: &[[f64; JET_LEN]; 4], grad: &mut [f64]) {
        let order = ws.order.expect("forward must run before backward");
        let comps = order.comps();
        let nl = self.n_layers();
        let mut bar_z = std::mem::take(&mut ws.bar_z);
        let mut bar_a = std::mem::take(&mut ws.bar_a);
        bar_z.clear();
        bar_z.resize(comps * OUTPUT_DIM, 0.0);
        for (k, ob) in out_bar.iter().enumerate() {
            let f = self.scales.output_factor(k);
            for c in 0..comps {
                bar_z[c * OUTPUT_DIM + k] = ob[c] * f;
            }
        }
        for l in (0..nl).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let start = self.offsets[l];
            let a = &ws.acts[l];
            {
                let (gw, gb) = grad[start..start + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for c in 0..comps {
                    let ac = &a[c * n_in..(c + 1) * n_in];
                    let zc = &bar_z[c * n_out..(c + 1) * n_out];
                    for (o, &zb) in zc.iter().enumerate() {
                        if zb != 0.0 {
                            axpy(zb, ac, &mut gw[o * n_in..(o + 1) * n_in]);
                        }
                    }
                }
                for (g, zb) in gb.iter_mut().zip(&bar_z[..n_out]) {
                    *g += zb;
                }
            }
            if l == 0 {
                break;
            }
            let (w, _, _, _) = self.layer(l);
            bar_a.clear();
            bar_a.resize(comps * n_in, 0.0);
            for c in 0..comps {
                let zc = &bar_z[c * n_out..(c + 1) * n_out];
                let ac = &mut bar_a[c * n_in..(c + 1) * n_in];
                for (o, &zb) in zc.iter().enumerate() {
                    if zb != 0.0 {
                        axpy(zb, &w[o * n_in..(o + 1) * n_in], ac);
                    }
                }
            }
            activate_backward(&ws.pre[l - 1], &bar_a, n_in, order, &mut bar_z);
        }
        ws.bar_z = bar_z;
        ws.bar_a = bar_a;
    }

    /// Same map as the specialized passes, written over any [`Real`] scalar
    /// for parameters and inputs. Used as an independent route for testing.
    pub fn eval_generic<R: Real>(&self, theta: &[R], input: [R; 4]) -> [R; 4] {
        let s = &self.scales;
        let mut a: Vec<R> = (0..3)
            .map(|d| (input[d] - s.shift[d]) / s.length)
            .chain(std::iter::once((input[3] - s.t_min) * s.frequency))
            .collect();
        let nl = self.n_layers();
        for l in 0..nl {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let start = self.offsets[l];
            let mut z = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let mut acc = theta[start + n_in * n_out + o];
                for (i, ai) in a.iter().enumerate() {
                    acc = acc + theta[start + o * n_in + i] * *ai;
                }
                z.push(acc);
            }
            a = if l + 1 < nl {
                z.into_iter().map(|v| v * v.sigmoid()).collect()
            } else {
                z
            };
        }
        std::array::from_fn(|k| a[k] * s.output_factor(k))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * k + j] * b[4 * k + j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn activate(z: &[f64], width: usize, order: Order, a: &mut Vec<f64>) {
    a.clear();
    a.resize(z.len(), 0.0);
    for i in 0..width {
        let (s0, s1, s2, _) = swish(z[i]);
        a[i] = s0;
        if order == Order::Second {
            let g = |c: usize| z[c * width + i];
            for d in 0..INPUTS {
                a[(1 + d) * width + i] = s1 * g(1 + d);
            }
            for (k, &(p, q)) in HESS_PAIRS.iter().enumerate() {
                let c = 1 + INPUTS + k;
                a[c * width + i] = s2 * g(1 + p) * g(1 + q) + s1 * g(c);
            }
        }
    }
}

fn activate_backward(z: &[f64], bar_a: &[f64], width: usize, order: Order, bar_z: &mut Vec<f64>) {
    bar_z.clear();
    bar_z.resize(bar_a.len(), 0.0);
    for i in 0..width {
        let (_, s1, s2, s3) = swish(z[i]);
        let mut b0 = s1 * bar_a[i];
        if order == Order::Second {
            let g = |c: usize| z[c * width + i];
            let mut bg = [0.0; INPUTS];
            for d in 0..INPUTS {
                let ab = bar_a[(1 + d) * width + i];
                bg[d] += s1 * ab;
                b0 += s2 * g(1 + d) * ab;
            }
            for (k, &(p, q)) in HESS_PAIRS.iter().enumerate() {
                let c = 1 + INPUTS + k;
                let ab = bar_a[c * width + i];
                if ab == 0.0 {
                    continue;
                }
                let (zp, zq) = (g(1 + p), g(1 + q));
                bar_z[c * width + i] = s1 * ab;
                bg[p] += s2 * zq * ab;
                bg[q] += s2 * zp * ab;
                b0 += (s3 * zp * zq + s2 * g(c)) * ab;
            }
            for d in 0..INPUTS {
                bar_z[(1 + d) * width + i] = bg[d];
            }
        }
        bar_z[i] = b0;
    }
}

impl DifferentiableField for NeuralField {
    fn eval(&self, point: [f64; 4]) -> [f64; 4] {
        let mut ws = Workspace::default();
        self.forward(point, Order::Value, &mut ws);
        self.values(&ws)
    }

    fn eval_jets(&self, point: [f64; 4]) -> [Jet; 4] {
        let mut ws = Workspace::default();
        self.forward(point, Order::Second, &mut ws);
        self.jets(&ws)
    }
}
