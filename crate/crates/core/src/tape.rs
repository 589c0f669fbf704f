//! Scalar reverse-mode differentiation on a Wengert list.
//!
//! Every node stores its value and the local partial derivatives towards at
//! most two parents, so the reverse sweep is a single pass of
//! multiply-accumulates. Piecewise operations record which branch they took in
//! a signature; two evaluations with equal signatures lie on the same smooth
//! piece of the function.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
struct Node {
    value: f64,
    parents: [usize; 2],
    partials: [f64; 2],
    arity: u8,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    branches: Vec<u32>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: Vec::with_capacity(n),
            branches: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: f64, parents: [usize; 2], partials: [f64; 2], arity: u8) -> Var {
        self.nodes.push(Node {
            value,
            parents,
            partials,
            arity,
        });
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, a: Var, value: f64, da: f64) -> Var {
        self.push(value, [a.0, 0], [da, 0.0], 1)
    }

    fn binary(&mut self, a: Var, b: Var, value: f64, da: f64, db: f64) -> Var {
        self.push(value, [a.0, b.0], [da, db], 2)
    }

    /// Leaf node: an input or parameter.
    pub fn var(&mut self, value: f64) -> Var {
        self.push(value, [0, 0], [0.0, 0.0], 0)
    }

    /// Leaf that never receives a meaningful gradient.
    pub fn constant(&mut self, value: f64) -> Var {
        self.var(value)
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.binary(a, b, v, 1.0, 1.0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.binary(a, b, v, 1.0, -1.0)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.binary(a, b, x * y, y, x)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.binary(a, b, x / y, 1.0 / y, -x / (y * y))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.unary(a, v, -1.0)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = c * self.value(a);
        self.unary(a, v, c)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.unary(a, v, 1.0)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.unary(a, v, v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.unary(a, x.ln(), 1.0 / x)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).tanh();
        self.unary(a, t, 1.0 - t * t)
    }

    pub fn atanh(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.unary(a, x.atanh(), 1.0 / (1.0 - x * x))
    }

    /// Logistic function `1 / (1 + e^{−x})`.
    pub fn sigmoid(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s = if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        };
        self.unary(a, s, s * (1.0 - s))
    }

    /// `max(x, 0)` with derivative 1 for `x > 0`, else 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let on = x > 0.0;
        self.branches.push(u32::from(on));
        if on {
            self.unary(a, x, 1.0)
        } else {
            self.unary(a, 0.0, 0.0)
        }
    }

    /// `|x|` with the sign of `x` treated as a constant.
    pub fn abs(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let neg = x.is_sign_negative();
        self.branches.push(u32::from(neg));
        self.unary(a, x.abs(), if neg { -1.0 } else { 1.0 })
    }

    /// Clamp to `[lo, hi]`; zero derivative where the bound is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let x = self.value(a);
        let (v, d, b) = if x < lo {
            (lo, 0.0, 0)
        } else if x > hi {
            (hi, 0.0, 2)
        } else {
            (x, 1.0, 1)
        };
        self.branches.push(b);
        self.unary(a, v, d)
    }

    /// Records a discrete choice made outside the tape, e.g. an argmin index.
    pub fn record_branch(&mut self, tag: u32) {
        self.branches.push(tag);
    }

    /// Sum of `xs` (zero for an empty slice).
    pub fn sum(&mut self, xs: &[Var]) -> Var {
        match xs {
            [] => self.constant(0.0),
            [first, rest @ ..] => rest.iter().fold(*first, |acc, &x| self.add(acc, x)),
        }
    }

    pub fn signature(&self) -> &[u32] {
        &self.branches
    }

    /// Adjoints of every node with respect to `output`.
    pub fn gradient(&self, output: Var) -> Vec<f64> {
        let mut adj = vec![0.0; output.0 + 1];
        adj[output.0] = 1.0;
        for i in (0..=output.0).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            for j in 0..node.arity as usize {
                adj[node.parents[j]] += g * node.partials[j];
            }
        }
        adj.resize(self.nodes.len(), 0.0);
        adj
    }

    /// Adjoint of `v` in a gradient vector from [`Tape::gradient`].
    pub fn adjoint(grad: &[f64], v: Var) -> f64 {
        grad[v.0]
    }
}
