//! Reverse-mode differentiation over a closed set of array operations.
//!
//! Every node holds a `[channels][len]` array (scalars are `1 x 1`). Ops are
//! appended in execution order, so the node index is a topological order and
//! the backward sweep simply walks it in reverse.

use std::sync::Arc;

use super::param::{Gradients, ParamId, ParamStore};
use crate::conv;
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<F> {
    Input,
    Param(ParamId),
    Conv {
        input: NodeId,
        kernel: NodeId,
        bias: Option<NodeId>,
        width: usize,
    },
    Relu(NodeId),
    /// `out = W * flatten(input) + b`, `W` is `[out, in]`.
    Dense {
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    AddN(Vec<NodeId>),
    Scale(NodeId, F),
    /// Scalar node times array node.
    ScaleBy {
        scalar: NodeId,
        input: NodeId,
    },
    SumChannels(NodeId),
    Sum(NodeId),
    SumAbs(NodeId),
    MeanSquare(NodeId),
    /// Mean of squares over entries whose mask flag equals `select` (0 when none).
    MaskedMeanSquare {
        input: NodeId,
        mask: Arc<[bool]>,
        select: bool,
    },
}

#[derive(Debug, Clone)]
struct Node<F> {
    value: Vec<F>,
    channels: usize,
    len: usize,
    requires_grad: bool,
    op: Op<F>,
}

/// Single-owner record of one forward computation.
#[derive(Debug, Clone, Default)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[F] {
        &self.nodes[id.0].value
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, id: NodeId) -> F {
        self.nodes[id.0].value[0]
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.channels, n.len)
    }

    fn push(&mut self, value: Vec<F>, channels: usize, len: usize, op: Op<F>) -> NodeId {
        debug_assert_eq!(value.len(), channels * len);
        let requires_grad = match &op {
            Op::Input => false,
            Op::Param(_) => true,
            op => inputs(op).iter().any(|i| self.nodes[i.0].requires_grad),
        };
        self.nodes.push(Node { value, channels, len, requires_grad, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant data, shaped `[channels][len]`.
    pub fn input(&mut self, values: Vec<F>, channels: usize) -> Result<NodeId> {
        if channels == 0 || !values.len().is_multiple_of(channels) || values.is_empty() {
            return Err(Error::Config(format!("cannot shape {} values into {channels} channels", values.len())));
        }
        let len = values.len() / channels;
        Ok(self.push(values, channels, len, Op::Input))
    }

    pub fn signal(&mut self, values: &[F]) -> NodeId {
        let len = values.len();
        self.push(values.to_vec(), 1, len, Op::Input)
    }

    pub fn constant(&mut self, v: F) -> NodeId {
        self.push(vec![v], 1, 1, Op::Input)
    }

    /// Brings a parameter onto the tape as a flat `1 x len` node.
    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId) -> NodeId {
        let values = store.values(id).to_vec();
        let len = values.len();
        self.push(values, 1, len, Op::Param(id))
    }

    /// Causal convolution; `kernel` must hold `c_out * c_in * width` values.
    pub fn conv(&mut self, input: NodeId, kernel: NodeId, bias: Option<NodeId>, c_out: usize) -> Result<NodeId> {
        let (c_in, len) = self.shape(input);
        let klen = self.nodes[kernel.0].value.len();
        if c_out == 0 || !klen.is_multiple_of(c_out * c_in) || klen == 0 {
            return Err(Error::Config(format!("kernel of {klen} values does not fit {c_out} x {c_in} channels")));
        }
        let width = klen / (c_out * c_in);
        if let Some(b) = bias {
            check_len(c_out, self.nodes[b.0].value.len())?;
        }
        let mut out = vec![F::zero(); c_out * len];
        conv::forward(
            &self.nodes[input.0].value,
            c_in,
            len,
            &self.nodes[kernel.0].value,
            c_out,
            width,
            bias.map(|b| self.nodes[b.0].value.as_slice()),
            &mut out,
        );
        Ok(self.push(out, c_out, len, Op::Conv { input, kernel, bias, width }))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let n = &self.nodes[input.0];
        let out = n.value.iter().map(|&v| v.max(F::zero())).collect();
        let (c, l) = (n.channels, n.len);
        self.push(out, c, l, Op::Relu(input))
    }

    /// Fully connected map of the flattened input to `weight.len() / input.len()` outputs.
    pub fn dense(&mut self, input: NodeId, weight: NodeId, bias: Option<NodeId>) -> Result<NodeId> {
        let x = &self.nodes[input.0].value;
        let w = &self.nodes[weight.0].value;
        if x.is_empty() || !w.len().is_multiple_of(x.len()) || w.is_empty() {
            return Err(Error::Config(format!("dense weight of {} values does not fit input of {}", w.len(), x.len())));
        }
        let n_out = w.len() / x.len();
        let mut out: Vec<F> =
            w.chunks(x.len()).map(|row| row.iter().zip(x).fold(F::zero(), |acc, (&a, &b)| acc + a * b)).collect();
        if let Some(b) = bias {
            let bv = &self.nodes[b.0].value;
            check_len(n_out, bv.len())?;
            out.iter_mut().zip(bv).for_each(|(o, &b)| *o += b);
        }
        Ok(self.push(out, 1, n_out, Op::Dense { input, weight, bias }))
    }

    fn same_shape(&self, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::LengthMismatch { expected: sa.0 * sa.1, found: sb.0 * sb.1 });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b)?;
        let out = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(&x, &y)| x + y).collect();
        let (c, l) = self.shape(a);
        Ok(self.push(out, c, l, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b)?;
        let out = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(&x, &y)| x - y).collect();
        let (c, l) = self.shape(a);
        Ok(self.push(out, c, l, Op::Sub(a, b)))
    }

    /// Elementwise sum of equally shaped nodes.
    pub fn add_n(&mut self, items: &[NodeId]) -> Result<NodeId> {
        let first = *items.first().ok_or_else(|| Error::Usage("add_n of nothing".into()))?;
        let mut out = self.nodes[first.0].value.clone();
        for &it in &items[1..] {
            self.same_shape(first, it)?;
            out.iter_mut().zip(&self.nodes[it.0].value).for_each(|(o, &v)| *o += v);
        }
        let (c, l) = self.shape(first);
        Ok(self.push(out, c, l, Op::AddN(items.to_vec())))
    }

    pub fn scale(&mut self, a: NodeId, s: F) -> NodeId {
        let out = self.nodes[a.0].value.iter().map(|&v| v * s).collect();
        let (c, l) = self.shape(a);
        self.push(out, c, l, Op::Scale(a, s))
    }

    pub fn scale_by(&mut self, scalar: NodeId, input: NodeId) -> Result<NodeId> {
        check_len(1, self.nodes[scalar.0].value.len())?;
        let s = self.nodes[scalar.0].value[0];
        let out = self.nodes[input.0].value.iter().map(|&v| v * s).collect();
        let (c, l) = self.shape(input);
        Ok(self.push(out, c, l, Op::ScaleBy { scalar, input }))
    }

    pub fn sum_channels(&mut self, a: NodeId) -> NodeId {
        let (c, l) = self.shape(a);
        let v = &self.nodes[a.0].value;
        let mut out = vec![F::zero(); l];
        for ch in 0..c {
            out.iter_mut().zip(&v[ch * l..(ch + 1) * l]).for_each(|(o, &x)| *o += x);
        }
        self.push(out, 1, l, Op::SumChannels(a))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.nodes[a.0].value.iter().copied().sum();
        self.push(vec![s], 1, 1, Op::Sum(a))
    }

    pub fn sum_abs(&mut self, a: NodeId) -> NodeId {
        let s = self.nodes[a.0].value.iter().map(|v| v.abs()).sum();
        self.push(vec![s], 1, 1, Op::SumAbs(a))
    }

    pub fn mean_square(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value;
        let s = v.iter().map(|&x| x * x).sum::<F>() / F::lit(v.len() as f64);
        self.push(vec![s], 1, 1, Op::MeanSquare(a))
    }

    pub fn masked_mean_square(&mut self, a: NodeId, mask: Arc<[bool]>, select: bool) -> Result<NodeId> {
        let v = &self.nodes[a.0].value;
        check_len(v.len(), mask.len())?;
        let (mut s, mut n) = (F::zero(), 0usize);
        for (&x, &m) in v.iter().zip(mask.iter()) {
            if m == select {
                s += x * x;
                n += 1;
            }
        }
        let out = if n == 0 { F::zero() } else { s / F::lit(n as f64) };
        Ok(self.push(vec![out], 1, 1, Op::MaskedMeanSquare { input: a, mask, select }))
    }

    /// Accumulates `d root / d param` into `grads` for every parameter the root depends on.
    pub fn backward(&self, root: NodeId, grads: &mut Gradients<F>) -> Result<()> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar root, node has {} values",
                self.nodes[root.0].value.len()
            )));
        }
        let mut adj: Vec<Option<Vec<F>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(vec![F::one()]);
        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut adj, grads);
        }
        Ok(())
    }

    /// Convenience wrapper accumulating straight into a store's gradients.
    pub fn backward_into(&self, root: NodeId, store: &mut ParamStore<F>) -> Result<()> {
        let mut grads = store.zero_gradients();
        self.backward(root, &mut grads)?;
        store.accumulate(&grads);
        Ok(())
    }

    fn propagate(&self, node: &Node<F>, g: &[F], adj: &mut [Option<Vec<F>>], grads: &mut Gradients<F>) {
        let zero = F::zero();
        // Returns the adjoint slot of `id` if it needs a gradient.
        macro_rules! slot {
            ($id:expr) => {{
                let id: NodeId = $id;
                if self.nodes[id.0].requires_grad {
                    let n = self.nodes[id.0].value.len();
                    Some(adj[id.0].get_or_insert_with(|| vec![zero; n]))
                } else {
                    None
                }
            }};
        }
        match &node.op {
            Op::Input => {}
            Op::Param(pid) => {
                for (a, &b) in grads.get_mut(*pid).iter_mut().zip(g) {
                    *a += b;
                }
            }
            Op::Conv { input, kernel, bias, width } => {
                let (c_in, len) = self.shape(*input);
                let c_out = node.channels;
                if let Some(gk) = slot!(*kernel) {
                    conv::backward_kernel(g, &self.nodes[input.0].value, c_in, len, c_out, *width, gk);
                }
                if let Some(b) = bias {
                    if let Some(gb) = slot!(*b) {
                        for (co, gbv) in gb.iter_mut().enumerate() {
                            *gbv += g[co * len..(co + 1) * len].iter().copied().sum::<F>();
                        }
                    }
                }
                if let Some(gx) = slot!(*input) {
                    conv::backward_input(g, c_in, len, &self.nodes[kernel.0].value, c_out, *width, gx);
                }
            }
            Op::Relu(a) => {
                if let Some(ga) = slot!(*a) {
                    // Subgradient 0 at exactly 0.
                    for ((o, &up), &x) in ga.iter_mut().zip(g).zip(&self.nodes[a.0].value) {
                        if x > zero {
                            *o += up;
                        }
                    }
                }
            }
            Op::Dense { input, weight, bias } => {
                let x = &self.nodes[input.0].value;
                let n_in = x.len();
                if let Some(gw) = slot!(*weight) {
                    for (row, &up) in gw.chunks_mut(n_in).zip(g) {
                        row.iter_mut().zip(x).for_each(|(w, &xv)| *w += up * xv);
                    }
                }
                if let Some(b) = bias {
                    if let Some(gb) = slot!(*b) {
                        gb.iter_mut().zip(g).for_each(|(o, &up)| *o += up);
                    }
                }
                if let Some(gx) = slot!(*input) {
                    let w = &self.nodes[weight.0].value;
                    for (row, &up) in w.chunks(n_in).zip(g) {
                        gx.iter_mut().zip(row).for_each(|(o, &wv)| *o += up * wv);
                    }
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = slot!(*a) {
                    ga.iter_mut().zip(g).for_each(|(o, &up)| *o += up);
                }
                if let Some(gb) = slot!(*b) {
                    gb.iter_mut().zip(g).for_each(|(o, &up)| *o += up);
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = slot!(*a) {
                    ga.iter_mut().zip(g).for_each(|(o, &up)| *o += up);
                }
                if let Some(gb) = slot!(*b) {
                    gb.iter_mut().zip(g).for_each(|(o, &up)| *o -= up);
                }
            }
            Op::AddN(items) => {
                for &it in items {
                    if let Some(gi) = slot!(it) {
                        gi.iter_mut().zip(g).for_each(|(o, &up)| *o += up);
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(ga) = slot!(*a) {
                    ga.iter_mut().zip(g).for_each(|(o, &up)| *o += up * *s);
                }
            }
            Op::ScaleBy { scalar, input } => {
                if let Some(gs) = slot!(*scalar) {
                    let x = &self.nodes[input.0].value;
                    gs[0] += g.iter().zip(x).map(|(&up, &xv)| up * xv).sum::<F>();
                }
                let s = self.nodes[scalar.0].value[0];
                if let Some(gx) = slot!(*input) {
                    gx.iter_mut().zip(g).for_each(|(o, &up)| *o += up * s);
                }
            }
            Op::SumChannels(a) => {
                let (c, l) = self.shape(*a);
                if let Some(ga) = slot!(*a) {
                    for ch in 0..c {
                        ga[ch * l..(ch + 1) * l].iter_mut().zip(g).for_each(|(o, &up)| *o += up);
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = slot!(*a) {
                    ga.iter_mut().for_each(|o| *o += g[0]);
                }
            }
            Op::SumAbs(a) => {
                if let Some(ga) = slot!(*a) {
                    for (o, &x) in ga.iter_mut().zip(&self.nodes[a.0].value) {
                        if x > zero {
                            *o += g[0];
                        } else if x < zero {
                            *o -= g[0];
                        }
                    }
                }
            }
            Op::MeanSquare(a) => {
                if let Some(ga) = slot!(*a) {
                    let x = &self.nodes[a.0].value;
                    let k = F::lit(2.0) * g[0] / F::lit(x.len() as f64);
                    ga.iter_mut().zip(x).for_each(|(o, &xv)| *o += k * xv);
                }
            }
            Op::MaskedMeanSquare { input, mask, select } => {
                let n = mask.iter().filter(|&&m| m == *select).count();
                if n > 0 {
                    if let Some(ga) = slot!(*input) {
                        let x = &self.nodes[input.0].value;
                        let k = F::lit(2.0) * g[0] / F::lit(n as f64);
                        for ((o, &xv), &m) in ga.iter_mut().zip(x).zip(mask.iter()) {
                            if m == *select {
                                *o += k * xv;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn inputs<F>(op: &Op<F>) -> Vec<NodeId> {
    match op {
        Op::Input | Op::Param(_) => vec![],
        Op::Conv { input, kernel, bias, .. } => {
            let mut v = vec![*input, *kernel];
            v.extend(bias);
            v
        }
        Op::Dense { input, weight, bias } => {
            let mut v = vec![*input, *weight];
            v.extend(bias);
            v
        }
        Op::Relu(a)
        | Op::Scale(a, _)
        | Op::SumChannels(a)
        | Op::Sum(a)
        | Op::SumAbs(a)
        | Op::MeanSquare(a)
        | Op::MaskedMeanSquare { input: a, .. } => vec![*a],
        Op::Add(a, b) | Op::Sub(a, b) => vec![*a, *b],
        Op::ScaleBy { scalar, input } => vec![*scalar, *input],
        Op::AddN(items) => items.clone(),
    }
}
