//! Reverse-mode differentiation over a recorded forward pass.
//!
//! A [`Tape`] borrows the network parameters, records every operation as it
//! computes forward values, and on [`Tape::backward`] walks the record once
//! in reverse to produce exact gradients for each parameter. The op set is
//! only what the networks need: embedding gathers, matrix-vector products,
//! elementwise gates, masked log-softmax, and a few scalar reductions.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor;

pub type NodeId = usize;

enum Op {
    Constant,
    Param(usize),
    Gather { table: NodeId, ids: Vec<u16> },
    MatVec { m: NodeId, v: NodeId },
    Add { a: NodeId, b: NodeId },
    Concat { a: NodeId, b: NodeId },
    Tanh { x: NodeId },
    Sigmoid { x: NodeId },
    Mul { a: NodeId, b: NodeId },
    OneMinus { x: NodeId },
    MaskedLogSoftmax { x: NodeId, legal: Vec<u16> },
    Pick { x: NodeId, index: usize },
    SquaredErr { x: NodeId, target: f64 },
    WeightedSum { terms: Vec<(NodeId, f64)> },
}

struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    /// Forward value; empty for `Param`, whose data lives in the tensor.
    value: Vec<f64>,
}

pub struct Tape<'p> {
    params: Vec<&'p Tensor>,
    param_nodes: Vec<Option<NodeId>>,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: Vec<&'p Tensor>) -> Tape<'p> {
        let param_nodes = vec![None; params.len()];
        Tape { params, param_nodes, nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        match self.nodes[id].op {
            Op::Param(i) => &self.params[i].data,
            _ => &self.nodes[id].value,
        }
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.len(), 1, "node is not a scalar");
        v[0]
    }

    fn len_of(&self, id: NodeId) -> usize {
        self.nodes[id].rows * self.nodes[id].cols
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, rows, cols, value });
        self.nodes.len() - 1
    }

    /// The node for parameter `i`; one node per parameter, cached.
    pub fn param(&mut self, i: usize) -> NodeId {
        if let Some(id) = self.param_nodes[i] {
            return id;
        }
        let (rows, cols) = self.params[i].shape();
        let id = self.push(Op::Param(i), rows, cols, Vec::new());
        self.param_nodes[i] = Some(id);
        id
    }

    /// A constant vector; receives no gradient.
    pub fn constant(&mut self, data: Vec<f64>) -> NodeId {
        let rows = data.len();
        self.push(Op::Constant, rows, 1, data)
    }

    /// Concatenated rows of a 2-D node selected by `ids`, flattened into a
    /// vector.
    pub fn gather(&mut self, table: NodeId, ids: &[u16]) -> NodeId {
        let width = self.nodes[table].cols;
        let table_rows = self.nodes[table].rows;
        let mut value = Vec::with_capacity(ids.len() * width);
        for &id in ids {
            let r = id as usize;
            assert!(r < table_rows, "gather id {r} out of {table_rows} rows");
            value.extend_from_slice(&self.value(table)[r * width..(r + 1) * width]);
        }
        let rows = value.len();
        self.push(
            Op::Gather { table, ids: ids.to_vec() },
            rows,
            1,
            value,
        )
    }

    /// Matrix-vector product `m · v`.
    pub fn matvec(&mut self, m: NodeId, v: NodeId) -> NodeId {
        let (rows, cols) = (self.nodes[m].rows, self.nodes[m].cols);
        assert_eq!(self.len_of(v), cols, "matvec shape mismatch");
        let mv = self.value(m);
        let vv = self.value(v);
        let value: Vec<f64> = (0..rows)
            .map(|r| {
                let mut acc = 0.0;
                for (a, b) in mv[r * cols..(r + 1) * cols].iter().zip(vv) {
                    acc += a * b;
                }
                acc
            })
            .collect();
        self.push(Op::MatVec { m, v }, rows, 1, value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.len_of(a), self.len_of(b), "add shape mismatch");
        let value: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let rows = value.len();
        self.push(Op::Add { a, b }, rows, 1, value)
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut value = self.value(a).to_vec();
        value.extend_from_slice(self.value(b));
        let rows = value.len();
        self.push(Op::Concat { a, b }, rows, 1, value)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value: Vec<f64> = self.value(x).iter().map(|&v| libm::tanh(v)).collect();
        let rows = value.len();
        self.push(Op::Tanh { x }, rows, 1, value)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value: Vec<f64> = self
            .value(x)
            .iter()
            .map(|&v| 1.0 / (1.0 + libm::exp(-v)))
            .collect();
        let rows = value.len();
        self.push(Op::Sigmoid { x }, rows, 1, value)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.len_of(a), self.len_of(b), "mul shape mismatch");
        let value: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let rows = value.len();
        self.push(Op::Mul { a, b }, rows, 1, value)
    }

    /// `1 - x`, elementwise.
    pub fn one_minus(&mut self, x: NodeId) -> NodeId {
        let value: Vec<f64> = self.value(x).iter().map(|v| 1.0 - v).collect();
        let rows = value.len();
        self.push(Op::OneMinus { x }, rows, 1, value)
    }

    /// Log-softmax over the `legal` indices; all other entries are `-inf`
    /// and receive no gradient.
    pub fn masked_log_softmax(&mut self, x: NodeId, legal: &[u16]) -> NodeId {
        assert!(!legal.is_empty(), "log-softmax needs a legal index");
        let xv = self.value(x);
        let max = legal
            .iter()
            .map(|&i| xv[i as usize])
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = legal.iter().map(|&i| libm::exp(xv[i as usize] - max)).sum();
        let lse = max + libm::log(total);
        let mut value = vec![f64::NEG_INFINITY; xv.len()];
        for &i in legal {
            value[i as usize] = xv[i as usize] - lse;
        }
        let rows = value.len();
        self.push(
            Op::MaskedLogSoftmax { x, legal: legal.to_vec() },
            rows,
            1,
            value,
        )
    }

    /// The scalar `x[index]`.
    pub fn pick(&mut self, x: NodeId, index: usize) -> NodeId {
        let v = self.value(x)[index];
        self.push(Op::Pick { x, index }, 1, 1, vec![v])
    }

    /// The scalar `(x - target)²` for scalar `x`.
    pub fn squared_err(&mut self, x: NodeId, target: f64) -> NodeId {
        let xv = self.scalar(x);
        let d = xv - target;
        self.push(Op::SquaredErr { x, target }, 1, 1, vec![d * d])
    }

    /// The scalar `Σ coefficient · term` over scalar terms.
    pub fn weighted_sum(&mut self, terms: &[(NodeId, f64)]) -> NodeId {
        let mut acc = 0.0;
        for &(id, c) in terms {
            acc += c * self.scalar(id);
        }
        self.push(Op::WeightedSum { terms: terms.to_vec() }, 1, 1, vec![acc])
    }

    /// Gradients of a scalar node with respect to every parameter, in
    /// parameter order. Parameters the graph never touched get zeros.
    pub fn backward(&self, loss: NodeId) -> Vec<Tensor> {
        assert_eq!(self.len_of(loss), 1, "can only differentiate a scalar");
        let mut param_grads: Vec<Tensor> = self
            .params
            .iter()
            .map(|p| Tensor::zeros(p.rows, p.cols))
            .collect();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss] = Some(vec![1.0]);

        for id in (0..=loss).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Constant => {}
                Op::Param(i) => {
                    for (pg, gv) in param_grads[*i].data.iter_mut().zip(&g) {
                        *pg += gv;
                    }
                }
                Op::Gather { table, ids } => {
                    let width = self.nodes[*table].cols;
                    let tg = self.grad_buffer(&mut grads, *table);
                    for (j, &row) in ids.iter().enumerate() {
                        let r = row as usize;
                        for k in 0..width {
                            tg[r * width + k] += g[j * width + k];
                        }
                    }
                }
                Op::MatVec { m, v } => {
                    let (rows, cols) = (self.nodes[*m].rows, self.nodes[*m].cols);
                    let mv = self.value(*m).to_vec();
                    let vv = self.value(*v).to_vec();
                    {
                        let gm = self.grad_buffer(&mut grads, *m);
                        for r in 0..rows {
                            for c in 0..cols {
                                gm[r * cols + c] += g[r] * vv[c];
                            }
                        }
                    }
                    let gv = self.grad_buffer(&mut grads, *v);
                    for c in 0..cols {
                        let mut acc = 0.0;
                        for r in 0..rows {
                            acc += g[r] * mv[r * cols + c];
                        }
                        gv[c] += acc;
                    }
                }
                Op::Add { a, b } => {
                    for child in [*a, *b] {
                        let cg = self.grad_buffer(&mut grads, child);
                        for (c, gv) in cg.iter_mut().zip(&g) {
                            *c += gv;
                        }
                    }
                }
                Op::Concat { a, b } => {
                    let alen = self.len_of(*a);
                    {
                        let ca = self.grad_buffer(&mut grads, *a);
                        for (c, gv) in ca.iter_mut().zip(&g[..alen]) {
                            *c += gv;
                        }
                    }
                    let cb = self.grad_buffer(&mut grads, *b);
                    for (c, gv) in cb.iter_mut().zip(&g[alen..]) {
                        *c += gv;
                    }
                }
                Op::Tanh { x } => {
                    let y = &self.nodes[id].value;
                    let gx = self.grad_buffer(&mut grads, *x);
                    for i in 0..g.len() {
                        gx[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Sigmoid { x } => {
                    let y = &self.nodes[id].value;
                    let gx = self.grad_buffer(&mut grads, *x);
                    for i in 0..g.len() {
                        gx[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Mul { a, b } => {
                    let av = self.value(*a).to_vec();
                    let bv = self.value(*b).to_vec();
                    {
                        let ga = self.grad_buffer(&mut grads, *a);
                        for i in 0..g.len() {
                            ga[i] += g[i] * bv[i];
                        }
                    }
                    let gb = self.grad_buffer(&mut grads, *b);
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
                Op::OneMinus { x } => {
                    let gx = self.grad_buffer(&mut grads, *x);
                    for i in 0..g.len() {
                        gx[i] -= g[i];
                    }
                }
                Op::MaskedLogSoftmax { x, legal } => {
                    let y = &self.nodes[id].value;
                    let total: f64 = legal.iter().map(|&i| g[i as usize]).sum();
                    let gx = self.grad_buffer(&mut grads, *x);
                    for &i in legal {
                        let i = i as usize;
                        gx[i] += g[i] - libm::exp(y[i]) * total;
                    }
                }
                Op::Pick { x, index } => {
                    let gx = self.grad_buffer(&mut grads, *x);
                    gx[*index] += g[0];
                }
                Op::SquaredErr { x, target } => {
                    let xv = self.scalar(*x);
                    let gx = self.grad_buffer(&mut grads, *x);
                    gx[0] += g[0] * 2.0 * (xv - target);
                }
                Op::WeightedSum { terms } => {
                    for &(tid, c) in terms {
                        let gt = self.grad_buffer(&mut grads, tid);
                        gt[0] += g[0] * c;
                    }
                }
            }
        }
        param_grads
    }

    fn grad_buffer<'g>(
        &self,
        grads: &'g mut [Option<Vec<f64>>],
        id: NodeId,
    ) -> &'g mut Vec<f64> {
        let len = self.len_of(id);
        grads[id].get_or_insert_with(|| vec![0.0; len])
    }
}
