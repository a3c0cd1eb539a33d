//! Reverse-mode scalar tape.
//!
//! Every operation appends a node holding at most two parent indices and the
//! local partial derivatives. `Tape::gradient` sweeps the nodes backwards.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::real::Real;
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    a: u32,
    da: f64,
    b: u32,
    db: f64,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(256)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Clears the recording. Existing variables must not be used afterwards.
    pub fn reset(&mut self) {
        self.nodes.get_mut().clear();
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        (nodes.len() - 1) as u32
    }

    /// A new independent variable.
    pub fn var(&self, val: f64) -> Var<'_> {
        let idx = self.push(Node {
            a: NONE,
            da: 0.0,
            b: NONE,
            db: 0.0,
        });
        Var {
            tape: self,
            idx,
            val,
        }
    }

    pub fn vars(&self, vals: &[f64]) -> Vec<Var<'_>> {
        vals.iter().map(|&v| self.var(v)).collect()
    }

    /// d(output)/d(wrt[i]) for every requested variable.
    pub fn gradient(&self, output: Var<'_>, wrt: &[Var<'_>]) -> Result<Vec<f64>> {
        if !std::ptr::eq(output.tape, self) {
            return Err(Error::ParameterNotInGraph);
        }
        if wrt.iter().any(|v| !std::ptr::eq(v.tape, self)) {
            return Err(Error::ParameterNotInGraph);
        }
        let adj = self.adjoints(output);
        Ok(wrt.iter().map(|v| adj[v.idx as usize]).collect())
    }

    /// Adjoint of every node with respect to `output`.
    pub fn adjoints(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        if let Some(slot) = adj.get_mut(output.idx as usize) {
            *slot = 1.0;
        }
        for i in (0..=output.idx as usize).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let n = nodes[i];
            if n.a != NONE {
                adj[n.a as usize] += g * n.da;
            }
            if n.b != NONE {
                adj[n.b as usize] += g * n.db;
            }
        }
        adj
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.idx as usize
    }

    #[inline]
    fn unary(self, val: f64, d: f64) -> Self {
        let idx = self.tape.push(Node {
            a: self.idx,
            da: d,
            b: NONE,
            db: 0.0,
        });
        Var {
            tape: self.tape,
            idx,
            val,
        }
    }

    #[inline]
    fn binary(self, rhs: Self, val: f64, da: f64, db: f64) -> Self {
        let idx = self.tape.push(Node {
            a: self.idx,
            da,
            b: rhs.idx,
            db,
        });
        Var {
            tape: self.tape,
            idx,
            val,
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.val;
        self.binary(rhs, self.val * inv, inv, -self.val * inv * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self {
        self.unary(self.val + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.val - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.val * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Self {
        self.unary(self.val / rhs, 1.0 / rhs)
    }
}

impl<'t> Real for Var<'t> {
    fn value(&self) -> f64 {
        self.val
    }
    fn lift(&self, v: f64) -> Self {
        self.tape.var(v)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }
    fn powf(self, e: f64) -> Self {
        self.unary(self.val.powf(e), e * self.val.powf(e - 1.0))
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        self.unary(r, -r * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let tape = Tape::new();
        let theta = tape.vars(&[1.0, -2.0, 0.5]);
        let mut loss = theta[0].zero_like();
        for &t in &theta {
            loss = loss + t * t;
        }
        let g = tape.gradient(loss, &theta).unwrap();
        assert_eq!(g, vec![2.0, -4.0, 1.0]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let tape = Tape::new();
        let theta = tape.vars(&[1.0, 2.0]);
        let loss = theta[0].lift(3.0);
        let g = tape.gradient(loss, &theta).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn foreign_parameter_is_rejected() {
        let tape = Tape::new();
        let other = Tape::new();
        let a = tape.var(1.0);
        let b = other.var(2.0);
        let loss = a * a;
        assert!(matches!(
            tape.gradient(loss, &[a, b]),
            Err(Error::ParameterNotInGraph)
        ));
        assert!(matches!(
            other.gradient(loss, &[b]),
            Err(Error::ParameterNotInGraph)
        ));
    }

    #[test]
    fn gradient_of_sum_is_sum_of_gradients() {
        let tape = Tape::new();
        let th = tape.vars(&[0.3, 1.7]);
        let f = th[0].sin() * th[1];
        let g = (th[0] * th[1]).exp();
        let gf = tape.gradient(f, &th).unwrap();
        let gg = tape.gradient(g, &th).unwrap();
        let gs = tape.gradient(f + g, &th).unwrap();
        for i in 0..2 {
            assert!((gs[i] - gf[i] - gg[i]).abs() < 1e-14);
        }
    }
}
