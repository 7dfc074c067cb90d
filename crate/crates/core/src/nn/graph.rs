//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in creation order, so walking the tape backwards visits every node after all
//! of its consumers. Each node holds a feature block `[sites, channels]` plus its geometry: a dense
//! box of voxels (linear index `((x*NY)+y)*NZ+z`) or a sparse active set.

use std::rc::Rc;

use super::kernels::{conv_backward_bias, conv_backward_input, conv_backward_weight, conv_forward};
use super::params::{ParamId, ParamStore};
use super::real::Real;
use super::sparse::{dense_rulebook, sparse_rulebook, submanifold_rulebook, Rulebook, SparseLayout};
use crate::error::{Error, Result};

/// Value of `-ln(1e-12)`: the cap on `-log sigmoid` terms.
pub const LOG_CLAMP: f64 = 27.631_021_115_928_547;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, PartialEq)]
pub enum Geom {
    Dense([usize; 3]),
    Sparse(Rc<SparseLayout>),
}

impl Geom {
    pub fn sites(&self) -> usize {
        match self {
            Geom::Dense(d) => d[0] * d[1] * d[2],
            Geom::Sparse(l) => l.len(),
        }
    }

    fn matches(&self, other: &Geom) -> bool {
        match (self, other) {
            (Geom::Dense(a), Geom::Dense(b)) => a == b,
            (Geom::Sparse(a), Geom::Sparse(b)) => Rc::ptr_eq(a, b) || a == b,
            _ => false,
        }
    }

    pub fn scalar() -> Self {
        Geom::Dense([1, 1, 1])
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        rules: Rc<Rulebook>,
    },
    LeakyRelu {
        x: Var,
        slope: T,
    },
    Sigmoid {
        x: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Upsample2 {
        x: Var,
    },
    AvgPool2 {
        x: Var,
    },
    ToDense {
        x: Var,
    },
    Mask {
        x: Var,
        mask: Rc<Vec<bool>>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        s: T,
    },
    AddScalar {
        x: Var,
    },
    Abs {
        x: Var,
    },
    Square {
        x: Var,
    },
    Sum {
        x: Var,
    },
    Mean {
        x: Var,
    },
    NegLogSigmoid {
        x: Var,
        flip: bool,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Vec<T>,
    geom: Geom,
    channels: usize,
    op: Op<T>,
    param: Option<ParamId>,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph<T: Real> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
    backward_done: bool,
}

fn sigmoid<T: Real>(x: T) -> T {
    T::ONE / (T::ONE + (-x).exp())
}

fn softplus<T: Real>(u: T) -> T {
    let pos = if u > T::ZERO { u } else { T::ZERO };
    pos + (-u.abs()).exp().ln_1p()
}

fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<T>, geom: Geom, channels: usize, op: Op<T>, requires_grad: bool) -> Var {
        debug_assert_eq!(value.len(), geom.sites() * channels);
        self.nodes.push(Node {
            value,
            geom,
            channels,
            op,
            param: None,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn geom(&self, v: Var) -> &Geom {
        &self.nodes[v.0].geom
    }

    pub fn channels(&self, v: Var) -> usize {
        self.nodes[v.0].channels
    }

    /// The single element of a scalar node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// A constant (no gradient flows into it).
    pub fn constant(&mut self, geom: Geom, channels: usize, data: Vec<T>) -> Result<Var> {
        if data.len() != geom.sites() * channels {
            return Err(shape_err(format!(
                "constant has {} values, geometry needs {}",
                data.len(),
                geom.sites() * channels
            )));
        }
        Ok(self.push(data, geom, channels, Op::Leaf, false))
    }

    /// A leaf that receives a gradient but is not bound to a parameter.
    pub fn variable(&mut self, geom: Geom, channels: usize, data: Vec<T>) -> Result<Var> {
        let v = self.constant(geom, channels, data)?;
        self.nodes[v.0].requires_grad = true;
        Ok(v)
    }

    pub fn scalar_constant(&mut self, x: T) -> Var {
        self.push(vec![x], Geom::scalar(), 1, Op::Leaf, false)
    }

    /// Binds parameter `id` from `store` as a flat leaf.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let data = store.value(id).to_vec();
        let n = data.len();
        let v = self.push(data, Geom::Dense([n, 1, 1]), 1, Op::Leaf, true);
        self.nodes[v.0].param = Some(id);
        v
    }

    /// Binds parameter `id` by value only: it takes part in the forward pass but receives no
    /// gradient.
    pub fn param_frozen(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let data = store.value(id).to_vec();
        let n = data.len();
        self.push(data, Geom::Dense([n, 1, 1]), 1, Op::Leaf, false)
    }

    /// Binds parameter `id` as a feature map with the given geometry.
    pub fn param_with_geom(&mut self, store: &ParamStore<T>, id: ParamId, geom: Geom, channels: usize) -> Result<Var> {
        let v = self.variable(geom, channels, store.value(id).to_vec())?;
        self.nodes[v.0].param = Some(id);
        Ok(v)
    }

    fn conv_with(&mut self, x: Var, w: Var, b: Option<Var>, rules: Rulebook, geom: Geom) -> Result<Var> {
        let cin = self.channels(x);
        let taps = rules.taps();
        let wl = self.value(w).len();
        if cin == 0 || !wl.is_multiple_of(taps * cin) || wl == 0 {
            return Err(shape_err(format!(
                "weight of {wl} values does not fit {taps} taps x {cin} input channels"
            )));
        }
        let cout = wl / (taps * cin);
        if let Some(b) = b {
            if self.value(b).len() != cout {
                return Err(shape_err(format!(
                    "bias has {} values, expected {cout}",
                    self.value(b).len()
                )));
            }
        }
        let out = conv_forward(
            self.value(x),
            cin,
            self.value(w),
            b.map(|b| self.value(b)),
            cout,
            &rules,
        );
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        Ok(self.push(
            out,
            geom,
            cout,
            Op::Conv {
                x,
                w,
                b,
                rules: Rc::new(rules),
            },
            rg,
        ))
    }

    /// Dense cross-correlation with zero padding; weights laid out `[k^3, c_in, c_out]`.
    pub fn conv3d(&mut self, x: Var, w: Var, b: Option<Var>, k: usize, stride: usize, pad: usize) -> Result<Var> {
        let Geom::Dense(dims) = *self.geom(x) else {
            return Err(shape_err("conv3d expects a dense input"));
        };
        let (out, rules) = dense_rulebook(dims, k, stride, pad)?;
        self.conv_with(x, w, b, rules, Geom::Dense(out))
    }

    /// Sparse convolution with padding `k/2`; the output is active wherever the receptive field
    /// meets an active input site.
    pub fn sparse_conv3d(&mut self, x: Var, w: Var, b: Option<Var>, k: usize, stride: usize) -> Result<Var> {
        let Geom::Sparse(layout) = self.geom(x).clone() else {
            return Err(shape_err("sparse_conv3d expects a sparse input"));
        };
        let (out, rules) = sparse_rulebook(&layout, k, stride, k / 2)?;
        self.conv_with(x, w, b, rules, Geom::Sparse(Rc::new(out)))
    }

    /// Stride-1 sparse convolution restricted to the input's active set.
    pub fn submanifold_conv3d(&mut self, x: Var, w: Var, b: Option<Var>, k: usize) -> Result<Var> {
        let Geom::Sparse(layout) = self.geom(x).clone() else {
            return Err(shape_err("submanifold_conv3d expects a sparse input"));
        };
        let rules = submanifold_rulebook(&layout, k)?;
        self.conv_with(x, w, b, rules, Geom::Sparse(layout))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::from_f64(slope);
        let out = self
            .value(x)
            .iter()
            .map(|&v| if v > T::ZERO { v } else { v * s })
            .collect();
        let n = self.node(x);
        let (g, c, rg) = (n.geom.clone(), n.channels, n.requires_grad);
        self.push(out, g, c, Op::LeakyRelu { x, slope: s }, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        let n = self.node(x);
        let (g, c, rg) = (n.geom.clone(), n.channels, n.requires_grad);
        self.push(out, g, c, Op::Sigmoid { x }, rg)
    }

    /// Channel-wise concatenation of two maps over the same sites.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        if !self.geom(a).matches(self.geom(b)) {
            return Err(shape_err("concat operands have different geometry"));
        }
        let (ca, cb) = (self.channels(a), self.channels(b));
        let sites = self.geom(a).sites();
        let mut out = Vec::with_capacity(sites * (ca + cb));
        for s in 0..sites {
            out.extend_from_slice(&self.value(a)[s * ca..(s + 1) * ca]);
            out.extend_from_slice(&self.value(b)[s * cb..(s + 1) * cb]);
        }
        let geom = self.geom(a).clone();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, geom, ca + cb, Op::Concat { a, b }, rg))
    }

    /// Nearest-neighbour upsampling by 2 along every axis.
    pub fn upsample2(&mut self, x: Var) -> Result<Var> {
        let Geom::Dense(d) = *self.geom(x) else {
            return Err(shape_err("upsample2 expects a dense input"));
        };
        let c = self.channels(x);
        let od = d.map(|v| v * 2);
        let src = self.value(x);
        let mut out = vec![T::ZERO; od[0] * od[1] * od[2] * c];
        for ox in 0..od[0] {
            for oy in 0..od[1] {
                for oz in 0..od[2] {
                    let o = (ox * od[1] + oy) * od[2] + oz;
                    let i = ((ox / 2) * d[1] + oy / 2) * d[2] + oz / 2;
                    out[o * c..(o + 1) * c].copy_from_slice(&src[i * c..(i + 1) * c]);
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out, Geom::Dense(od), c, Op::Upsample2 { x }, rg))
    }

    /// 2x2x2 average pooling, stride 2; odd extents round up and edge cells average the voxels
    /// they actually cover.
    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        let Geom::Dense(d) = *self.geom(x) else {
            return Err(shape_err("avg_pool2 expects a dense input"));
        };
        let c = self.channels(x);
        let od = d.map(|v| v.div_ceil(2));
        let src = self.value(x);
        let mut out = vec![T::ZERO; od[0] * od[1] * od[2] * c];
        for_each_pool_cell(d, od, |o, children, count| {
            let inv = T::from_f64(1.0 / count as f64);
            for &i in children {
                for ch in 0..c {
                    out[o * c + ch] += src[i * c + ch];
                }
            }
            for ch in 0..c {
                out[o * c + ch] *= inv;
            }
        });
        let rg = self.rg(x);
        Ok(self.push(out, Geom::Dense(od), c, Op::AvgPool2 { x }, rg))
    }

    /// Scatters a sparse map into a zero-filled dense grid of the layout's dims.
    pub fn to_dense(&mut self, x: Var) -> Result<Var> {
        let Geom::Sparse(layout) = self.geom(x).clone() else {
            return Err(shape_err("to_dense expects a sparse input"));
        };
        let c = self.channels(x);
        let dims = layout.dims();
        let mut out = vec![T::ZERO; dims[0] * dims[1] * dims[2] * c];
        let src = self.value(x);
        for i in 0..layout.len() {
            let o = layout.linear(i);
            out[o * c..(o + 1) * c].copy_from_slice(&src[i * c..(i + 1) * c]);
        }
        let rg = self.rg(x);
        Ok(self.push(out, Geom::Dense(dims), c, Op::ToDense { x }, rg))
    }

    /// Zeroes every site where `mask` is false.
    pub fn mask(&mut self, x: Var, mask: Rc<Vec<bool>>) -> Result<Var> {
        let sites = self.geom(x).sites();
        if mask.len() != sites {
            return Err(shape_err(format!("mask has {} sites, input {sites}", mask.len())));
        }
        let c = self.channels(x);
        let mut out = self.value(x).to_vec();
        for (s, keep) in mask.iter().enumerate() {
            if !keep {
                out[s * c..(s + 1) * c].fill(T::ZERO);
            }
        }
        let n = self.node(x);
        let (g, rg) = (n.geom.clone(), n.requires_grad);
        Ok(self.push(out, g, c, Op::Mask { x, mask }, rg))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let (na, nb) = (self.node(a), self.node(b));
        if na.value.len() != nb.value.len() || !na.geom.matches(&nb.geom) {
            return Err(shape_err(format!(
                "element-wise operands differ: {} vs {} values",
                na.value.len(),
                nb.value.len()
            )));
        }
        let out = na.value.iter().zip(&nb.value).map(|(&x, &y)| f(x, y)).collect();
        let (g, c) = (na.geom.clone(), na.channels);
        let rg = na.requires_grad || nb.requires_grad;
        Ok(self.push(out, g, c, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul { a, b })
    }

    fn unary(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let n = self.node(x);
        let out = n.value.iter().map(|&v| f(v)).collect();
        let (g, c, rg) = (n.geom.clone(), n.channels, n.requires_grad);
        self.push(out, g, c, op, rg)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let s = T::from_f64(s);
        self.unary(x, |v| v * s, Op::Scale { x, s })
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let c = T::from_f64(c);
        self.unary(x, |v| v + c, Op::AddScalar { x })
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.abs(), Op::Abs { x })
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, |v| v * v, Op::Square { x })
    }

    /// `-ln(sigmoid(x))` (or `-ln(1 - sigmoid(x))` when `flip`), element-wise, capped at
    /// [`LOG_CLAMP`] so probabilities below 1e-12 do not blow up.
    pub fn neg_log_sigmoid(&mut self, x: Var, flip: bool) -> Var {
        let clamp = T::from_f64(LOG_CLAMP);
        self.unary(
            x,
            |v| {
                let z = if flip { -v } else { v };
                let s = softplus(-z);
                if s > clamp {
                    clamp
                } else {
                    s
                }
            },
            Op::NegLogSigmoid { x, flip },
        )
    }

    /// Sum of all elements, accumulated in f64.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).iter().map(|v| v.to_f64()).sum();
        let rg = self.rg(x);
        self.push(vec![T::from_f64(s)], Geom::scalar(), 1, Op::Sum { x }, rg)
    }

    /// Mean of all elements, accumulated in f64. The mean of an empty node is 0.
    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len();
        let s: f64 = self.value(x).iter().map(|v| v.to_f64()).sum();
        let m = if n == 0 { 0.0 } else { s / n as f64 };
        let rg = self.rg(x);
        self.push(vec![T::from_f64(m)], Geom::scalar(), 1, Op::Mean { x }, rg)
    }

    /// Sign pattern of every non-smooth op input; finite-difference probes that change it straddle
    /// a kink.
    pub fn kink_signature(&self) -> Vec<bool> {
        let mut sig = Vec::new();
        for n in &self.nodes {
            match n.op {
                Op::LeakyRelu { x, .. } => sig.extend(self.value(x).iter().map(|v| *v > T::ZERO)),
                Op::Abs { x } => sig.extend(self.value(x).iter().flat_map(|v| [*v > T::ZERO, *v < T::ZERO])),
                Op::NegLogSigmoid { .. } => {
                    let c = T::from_f64(LOG_CLAMP);
                    sig.extend(n.value.iter().map(|v| *v >= c))
                }
                _ => {}
            }
        }
        sig
    }

    /// Reverse pass from a scalar root. Gradients of every node that depends on a parameter or
    /// variable stay queryable through [`Graph::grad`].
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Graph(
                "backward already ran on this graph; build a new graph".into(),
            ));
        }
        if self.value(root).len() != 1 {
            return Err(Error::Graph(format!(
                "backward root must be scalar, got {} elements",
                self.value(root).len()
            )));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.rg(root) {
            grads[root.0] = Some(vec![T::ONE]);
        }
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    /// Adds the gradients of every parameter of `store` bound in this graph.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore<T>) {
        for (n, g) in self.nodes.iter().zip(&self.grads) {
            if let (Some(id), Some(g)) = (n.param, g) {
                if store.owns(id) {
                    store.add_grad(id, g);
                }
            }
        }
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let nodes = &self.nodes;
        let mut with = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            let n = &nodes[v.0];
            if !n.requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![T::ZERO; n.value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv { x, w, b, rules } => {
                let cin = self.channels(*x);
                let cout = node.channels;
                with(*x, &mut |dx| {
                    conv_backward_input(g, self.value(*w), cin, cout, rules, dx)
                });
                with(*w, &mut |dw| {
                    conv_backward_weight(g, self.value(*x), cin, cout, rules, dw)
                });
                if let Some(b) = b {
                    with(*b, &mut |db| conv_backward_bias(g, cout, db));
                }
            }
            Op::LeakyRelu { x, slope } => {
                let xv = self.value(*x);
                with(*x, &mut |dx| {
                    for ((d, &gv), &v) in dx.iter_mut().zip(g).zip(xv) {
                        *d += if v > T::ZERO { gv } else { gv * *slope };
                    }
                });
            }
            Op::Sigmoid { x } => {
                let y = &node.value;
                with(*x, &mut |dx| {
                    for ((d, &gv), &yv) in dx.iter_mut().zip(g).zip(y) {
                        *d += gv * yv * (T::ONE - yv);
                    }
                });
            }
            Op::Concat { a, b } => {
                let (ca, cb) = (self.channels(*a), self.channels(*b));
                let c = ca + cb;
                with(*a, &mut |da| {
                    for (s, d) in da.chunks_exact_mut(ca).enumerate() {
                        for (dv, &gv) in d.iter_mut().zip(&g[s * c..s * c + ca]) {
                            *dv += gv;
                        }
                    }
                });
                with(*b, &mut |db| {
                    for (s, d) in db.chunks_exact_mut(cb).enumerate() {
                        for (dv, &gv) in d.iter_mut().zip(&g[s * c + ca..(s + 1) * c]) {
                            *dv += gv;
                        }
                    }
                });
            }
            Op::Upsample2 { x } => {
                let Geom::Dense(d) = *self.geom(*x) else { unreachable!() };
                let Geom::Dense(od) = node.geom else { unreachable!() };
                let c = node.channels;
                with(*x, &mut |dx| {
                    for ox in 0..od[0] {
                        for oy in 0..od[1] {
                            for oz in 0..od[2] {
                                let o = (ox * od[1] + oy) * od[2] + oz;
                                let s = ((ox / 2) * d[1] + oy / 2) * d[2] + oz / 2;
                                for ch in 0..c {
                                    dx[s * c + ch] += g[o * c + ch];
                                }
                            }
                        }
                    }
                });
            }
            Op::AvgPool2 { x } => {
                let Geom::Dense(d) = *self.geom(*x) else { unreachable!() };
                let Geom::Dense(od) = node.geom else { unreachable!() };
                let c = node.channels;
                with(*x, &mut |dx| {
                    for_each_pool_cell(d, od, |o, children, count| {
                        let inv = T::from_f64(1.0 / count as f64);
                        for &i in children {
                            for ch in 0..c {
                                dx[i * c + ch] += g[o * c + ch] * inv;
                            }
                        }
                    });
                });
            }
            Op::ToDense { x } => {
                let Geom::Sparse(layout) = self.geom(*x) else {
                    unreachable!()
                };
                let c = node.channels;
                with(*x, &mut |dx| {
                    for i in 0..layout.len() {
                        let o = layout.linear(i);
                        for ch in 0..c {
                            dx[i * c + ch] += g[o * c + ch];
                        }
                    }
                });
            }
            Op::Mask { x, mask } => {
                let c = node.channels;
                with(*x, &mut |dx| {
                    for (s, keep) in mask.iter().enumerate() {
                        if *keep {
                            for ch in s * c..(s + 1) * c {
                                dx[ch] += g[ch];
                            }
                        }
                    }
                });
            }
            Op::Add { a, b } => {
                with(*a, &mut |d| add_into(d, g));
                with(*b, &mut |d| add_into(d, g));
            }
            Op::Sub { a, b } => {
                with(*a, &mut |d| add_into(d, g));
                with(*b, &mut |d| {
                    for (dv, &gv) in d.iter_mut().zip(g) {
                        *dv -= gv;
                    }
                });
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                with(*a, &mut |d| {
                    for ((dv, &gv), &o) in d.iter_mut().zip(g).zip(bv) {
                        *dv += gv * o;
                    }
                });
                with(*b, &mut |d| {
                    for ((dv, &gv), &o) in d.iter_mut().zip(g).zip(av) {
                        *dv += gv * o;
                    }
                });
            }
            Op::Scale { x, s } => with(*x, &mut |d| {
                for (dv, &gv) in d.iter_mut().zip(g) {
                    *dv += gv * *s;
                }
            }),
            Op::AddScalar { x } => with(*x, &mut |d| add_into(d, g)),
            Op::Abs { x } => {
                let xv = self.value(*x);
                with(*x, &mut |d| {
                    for ((dv, &gv), &v) in d.iter_mut().zip(g).zip(xv) {
                        if v > T::ZERO {
                            *dv += gv;
                        } else if v < T::ZERO {
                            *dv -= gv;
                        }
                    }
                });
            }
            Op::Square { x } => {
                let xv = self.value(*x);
                with(*x, &mut |d| {
                    for ((dv, &gv), &v) in d.iter_mut().zip(g).zip(xv) {
                        *dv += gv * (v + v);
                    }
                });
            }
            Op::Sum { x } => with(*x, &mut |d| {
                for dv in d.iter_mut() {
                    *dv += g[0];
                }
            }),
            Op::Mean { x } => with(*x, &mut |d| {
                let gv = T::from_f64(g[0].to_f64() / d.len() as f64);
                for dv in d.iter_mut() {
                    *dv += gv;
                }
            }),
            Op::NegLogSigmoid { x, flip } => {
                let xv = self.value(*x);
                let clamp = T::from_f64(LOG_CLAMP);
                with(*x, &mut |d| {
                    for (((dv, &gv), &v), &y) in d.iter_mut().zip(g).zip(xv).zip(&node.value) {
                        if y >= clamp {
                            continue;
                        }
                        // d/dx softplus(-z) with z = +-x
                        let z = if *flip { -v } else { v };
                        let s = sigmoid(-z);
                        if *flip {
                            *dv += gv * s;
                        } else {
                            *dv -= gv * s;
                        }
                    }
                });
            }
        }
    }
}

fn add_into<T: Real>(d: &mut [T], g: &[T]) {
    for (dv, &gv) in d.iter_mut().zip(g) {
        *dv += gv;
    }
}

/// Visits every pooled cell with the linear indices of the input voxels it covers.
fn for_each_pool_cell(d: [usize; 3], od: [usize; 3], mut f: impl FnMut(usize, &[usize], usize)) {
    let mut children = Vec::with_capacity(8);
    for ox in 0..od[0] {
        for oy in 0..od[1] {
            for oz in 0..od[2] {
                children.clear();
                for x in 2 * ox..(2 * ox + 2).min(d[0]) {
                    for y in 2 * oy..(2 * oy + 2).min(d[1]) {
                        for z in 2 * oz..(2 * oz + 2).min(d[2]) {
                            children.push((x * d[1] + y) * d[2] + z);
                        }
                    }
                }
                let o = (ox * od[1] + oy) * od[2] + oz;
                f(o, &children, children.len());
            }
        }
    }
}
