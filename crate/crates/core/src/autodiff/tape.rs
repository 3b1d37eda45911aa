//! Reverse-mode tape over scalar variables.
//!
//! Every primitive records at most two parents together with the local
//! partial derivatives, so the reverse sweep is a single pass over the node
//! arena in reverse order. Jets over [`Var`] route adjoints into each jet
//! coefficient without any special extraction node: reading `jet.d2` simply
//! hands back the tape variable holding that coefficient.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Index, Mul, Neg, Sub};

use super::Real;
use crate::error::Error;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Arena of recorded operations. Nodes are appended in evaluation order, so
/// operands always precede their results.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    /// Register an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(Node {
            parents: [NONE, NONE],
            partials: [0.0, 0.0],
        });
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drop all recorded nodes, keeping the allocation.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        assert!(idx < NONE as usize, "tape overflow");
        nodes.push(node);
        idx as u32
    }

    /// Reverse sweep seeded with `d out / d out = 1`.
    pub fn backward(&self, out: Var<'_>) -> Adjoints {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        if out.idx == NONE {
            return Adjoints(adj);
        }
        adj[out.idx as usize] = 1.0;
        for i in (0..=out.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NONE {
                    adj[p as usize] += a * node.partials[k];
                }
            }
        }
        Adjoints(adj)
    }
}

/// Adjoints of every recorded variable after one reverse sweep.
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    pub fn of(&self, v: &Var<'_>) -> f64 {
        if v.idx == NONE {
            0.0
        } else {
            self.0[v.idx as usize]
        }
    }
}

impl Index<&Var<'_>> for Adjoints {
    type Output = f64;
    fn index(&self, v: &Var<'_>) -> &f64 {
        if v.idx == NONE {
            &0.0
        } else {
            &self.0[v.idx as usize]
        }
    }
}

/// Tape variable. Constants carry no tape and record no nodes.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.idx == NONE {
            write!(f, "Var(const {})", self.val)
        } else {
            write!(f, "Var(#{} = {})", self.idx, self.val)
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Self {
            tape: None,
            idx: NONE,
            val,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.idx == NONE
    }

    #[inline]
    fn unary(self, val: f64, partial: f64) -> Self {
        match self.tape {
            None => Var::constant(val),
            Some(tape) => Var {
                tape: Some(tape),
                idx: tape.push(Node {
                    parents: [self.idx, NONE],
                    partials: [partial, 0.0],
                }),
                val,
            },
        }
    }

    #[inline]
    fn binary(self, rhs: Self, val: f64, dl: f64, dr: f64) -> Self {
        match self.tape.or(rhs.tape) {
            None => Var::constant(val),
            Some(tape) => Var {
                tape: Some(tape),
                idx: tape.push(Node {
                    parents: [self.idx, rhs.idx],
                    partials: [dl, dr],
                }),
                val,
            },
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.val / rhs.val;
        self.binary(rhs, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Real for Var<'t> {
    fn lift(v: f64) -> Self {
        Var::constant(v)
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn relu(self) -> Self {
        if self.val > 0.0 {
            self
        } else {
            Var::constant(0.0)
        }
    }
    fn abs(self) -> Self {
        if self.val < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: i32) -> Self {
        self.unary(self.val.powi(n), f64::from(n) * self.val.powi(n - 1))
    }
    fn powf(self, p: f64) -> Self {
        self.unary(self.val.powf(p), p * self.val.powf(p - 1.0))
    }
    fn scale(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }
    fn add_const(self, c: f64) -> Self {
        self.unary(self.val + c, 1.0)
    }
}

/// Gradient of a scalar function of a parameter vector.
///
/// A fresh tape is recorded per call, so repeated calls on identical inputs
/// are bit-identical.
pub fn grad<F>(loss: F, at: &[f64]) -> Result<Vec<f64>, Error>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    value_and_grad(loss, at).map(|(_, g)| g)
}

pub fn value_and_grad<F>(loss: F, at: &[f64]) -> Result<(f64, Vec<f64>), Error>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::with_capacity(at.len() * 4);
    let params = tape.vars(at);
    let out = loss(&params);
    if !out.val.is_finite() {
        return Err(Error::NonFinite {
            what: "loss".into(),
            value: out.val,
        });
    }
    let adj = tape.backward(out);
    Ok((out.val, params.iter().map(|p| adj.of(p)).collect()))
}
