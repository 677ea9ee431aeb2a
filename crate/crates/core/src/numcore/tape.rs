//! Reverse-mode automatic differentiation over batched 2-D values.
//!
//! A `Tape` records a computation as a flat list of nodes; `backward` replays
//! it in reverse, writing exact gradients into every node that (a) depends on
//! a differentiable leaf and (b) contributes to the loss. Nodes that fail
//! either test are skipped entirely, which is what makes "frozen" network
//! bindings cheap: their weight gradients are never materialized.
//!
//! Every value is a row-major matrix; a batch of vectors is one node with
//! `rows` = batch size. Buffers are recycled through an internal pool so a
//! tape can be `clear`ed and reused across training iterations without
//! re-allocating.

use super::kernels;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PNorm {
    L1,
    L2,
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// y = x * W^T + b (W is [out, in] row-major, b is [1, out])
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        w_t: Vec<f64>,
    },
    Tanh(NodeId),
    Relu(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MinElem(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Square(NodeId),
    Exp(NodeId),
    Softplus(NodeId),
    Clamp(NodeId, f64, f64),
    ConcatCols(NodeId, NodeId),
    SliceCols {
        x: NodeId,
        from: usize,
        to: usize,
    },
    SumRows(NodeId),
    MeanAll(NodeId),
    RowPNorm(NodeId, PNorm),
}

struct Node {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    grad: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    pool: Vec<Vec<f64>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Drops all recorded nodes, returning their buffers to the pool.
    pub fn clear(&mut self) {
        for mut node in self.nodes.drain(..) {
            node.data.clear();
            self.pool.push(node.data);
            if node.grad.capacity() > 0 {
                node.grad.clear();
                self.pool.push(node.grad);
            }
        }
    }

    fn alloc(&mut self, len: usize) -> Vec<f64> {
        // Exact-capacity reuse only: each iteration rebuilds the same graph,
        // so after the first pass every size hits. A looser fit would hand
        // large buffers to small nodes and force fresh large allocations.
        for i in (0..self.pool.len()).rev() {
            if self.pool[i].capacity() == len {
                let mut buf = self.pool.swap_remove(i);
                buf.resize(len, 0.0);
                return buf;
            }
        }
        vec![0.0; len]
    }

    fn alloc_zeroed(&mut self, len: usize) -> Vec<f64> {
        let mut buf = self.alloc(len);
        buf.iter_mut().for_each(|v| *v = 0.0);
        buf
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, op: Op, needs_grad: bool) -> NodeId {
        debug_assert_eq!(data.len(), rows * cols);
        let id = self.nodes.len();
        self.nodes.push(Node {
            rows,
            cols,
            data,
            grad: Vec::new(),
            op,
            needs_grad,
        });
        id
    }

    fn unary_needs(&self, x: NodeId) -> bool {
        self.nodes[x].needs_grad
    }

    pub fn rows(&self, id: NodeId) -> usize {
        self.nodes[id].rows
    }

    pub fn cols(&self, id: NodeId) -> usize {
        self.nodes[id].cols
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].data
    }

    /// Gradient of the last `backward` call w.r.t. node `id`.
    ///
    /// Empty if the node did not participate (zero gradient by construction).
    pub fn grad(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].grad
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        assert_eq!(self.nodes[id].data.len(), 1, "node is not a scalar");
        self.nodes[id].data[0]
    }

    // ---- leaves ------------------------------------------------------

    /// Differentiable leaf (network parameters, probed inputs).
    pub fn leaf(&mut self, rows: usize, cols: usize, data: &[f64]) -> NodeId {
        assert_eq!(data.len(), rows * cols, "leaf shape mismatch");
        let mut buf = self.alloc(data.len());
        buf.copy_from_slice(data);
        self.push(rows, cols, buf, Op::Leaf, true)
    }

    /// Constant leaf: no gradient is ever computed for it or through it.
    pub fn constant(&mut self, rows: usize, cols: usize, data: &[f64]) -> NodeId {
        assert_eq!(data.len(), rows * cols, "constant shape mismatch");
        let mut buf = self.alloc(data.len());
        buf.copy_from_slice(data);
        self.push(rows, cols, buf, Op::Leaf, false)
    }

    // ---- ops ---------------------------------------------------------

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let (m, k) = (self.nodes[x].rows, self.nodes[x].cols);
        let (out, k_w) = (self.nodes[w].rows, self.nodes[w].cols);
        assert_eq!(k, k_w, "linear: input dim {k} != weight dim {k_w}");
        assert_eq!(self.nodes[b].data.len(), out, "linear: bias dim mismatch");
        let mut w_t = self.alloc(out * k);
        kernels::transpose(&self.nodes[w].data, out, k, &mut w_t);
        let mut y = self.alloc(m * out);
        for i in 0..m {
            y[i * out..(i + 1) * out].copy_from_slice(&self.nodes[b].data);
        }
        kernels::matmul_acc(&self.nodes[x].data, &w_t, &mut y, m, k, out);
        let needs = self.nodes[x].needs_grad || self.nodes[w].needs_grad || self.nodes[b].needs_grad;
        self.push(m, out, y, Op::Linear { x, w, b, w_t }, needs)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m * n);
        y.copy_from_slice(&self.nodes[x].data);
        kernels::tanh_slice(&mut y);
        let needs = self.unary_needs(x);
        self.push(m, n, y, Op::Tanh(x), needs)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m * n);
        y.copy_from_slice(&self.nodes[x].data);
        kernels::relu_slice(&mut y);
        let needs = self.unary_needs(x);
        self.push(m, n, y, Op::Relu(x), needs)
    }

    fn binary_shape(&self, a: NodeId, b: NodeId) -> (usize, usize) {
        let (m, n) = (self.nodes[a].rows, self.nodes[a].cols);
        assert_eq!(
            (m, n),
            (self.nodes[b].rows, self.nodes[b].cols),
            "elementwise op shape mismatch"
        );
        (m, n)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, n) = self.binary_shape(a, b);
        let mut y = self.alloc(m * n);
        for (i, yv) in y.iter_mut().enumerate() {
            *yv = self.nodes[a].data[i] + self.nodes[b].data[i];
        }
        let needs = self.nodes[a].needs_grad || self.nodes[b].needs_grad;
        self.push(m, n, y, Op::Add(a, b), needs)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, n) = self.binary_shape(a, b);
        let mut y = self.alloc(m * n);
        for (i, yv) in y.iter_mut().enumerate() {
            *yv = self.nodes[a].data[i] - self.nodes[b].data[i];
        }
        let needs = self.nodes[a].needs_grad || self.nodes[b].needs_grad;
        self.push(m, n, y, Op::Sub(a, b), needs)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, n) = self.binary_shape(a, b);
        let mut y = self.alloc(m * n);
        for (i, yv) in y.iter_mut().enumerate() {
            *yv = self.nodes[a].data[i] * self.nodes[b].data[i];
        }
        let needs = self.nodes[a].needs_grad || self.nodes[b].needs_grad;
        self.push(m, n, y, Op::Mul(a, b), needs)
    }

    /// Elementwise minimum; gradient follows the smaller operand (ties -> a).
    pub fn min_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, n) = self.binary_shape(a, b);
        let mut y = self.alloc(m * n);
        for (i, yv) in y.iter_mut().enumerate() {
            *yv = self.nodes[a].data[i].min(self.nodes[b].data[i]);
        }
        let needs = self.nodes[a].needs_grad || self.nodes[b].needs_grad;
        self.push(m, n, y, Op::MinElem(a, b), needs)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m * n);
        for (yv, &xv) in y.iter_mut().zip(self.nodes[x].data.iter()) {
            *yv = xv * c;
        }
        let needs = self.unary_needs(x);
        self.push(m, n, y, Op::Scale(x, c), needs)
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m * n);
        for (yv, &xv) in y.iter_mut().zip(self.nodes[x].data.iter()) {
            *yv = xv + c;
        }
        let needs = self.unary_needs(x);
        self.push(m, n, y, Op::AddScalar(x), needs)
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m * n);
        for (yv, &xv) in y.iter_mut().zip(self.nodes[x].data.iter()) {
            *yv = xv * xv;
        }
        let needs = self.unary_needs(x);
        self.push(m, n, y, Op::Square(x), needs)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m * n);
        for (yv, &xv) in y.iter_mut().zip(self.nodes[x].data.iter()) {
            *yv = kernels::fast_exp(xv);
        }
        let needs = self.unary_needs(x);
        self.push(m, n, y, Op::Exp(x), needs)
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m * n);
        for (yv, &xv) in y.iter_mut().zip(self.nodes[x].data.iter()) {
            *yv = kernels::softplus(xv);
        }
        let needs = self.unary_needs(x);
        self.push(m, n, y, Op::Softplus(x), needs)
    }

    /// Clamp to [lo, hi]; gradient passes through wherever lo <= x <= hi.
    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m * n);
        for (yv, &xv) in y.iter_mut().zip(self.nodes[x].data.iter()) {
            *yv = xv.clamp(lo, hi);
        }
        let needs = self.unary_needs(x);
        self.push(m, n, y, Op::Clamp(x, lo, hi), needs)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, na) = (self.nodes[a].rows, self.nodes[a].cols);
        let (mb, nb) = (self.nodes[b].rows, self.nodes[b].cols);
        assert_eq!(m, mb, "concat_cols: row mismatch");
        let n = na + nb;
        let mut y = self.alloc(m * n);
        for i in 0..m {
            y[i * n..i * n + na].copy_from_slice(&self.nodes[a].data[i * na..(i + 1) * na]);
            y[i * n + na..(i + 1) * n].copy_from_slice(&self.nodes[b].data[i * nb..(i + 1) * nb]);
        }
        let needs = self.nodes[a].needs_grad || self.nodes[b].needs_grad;
        self.push(m, n, y, Op::ConcatCols(a, b), needs)
    }

    pub fn slice_cols(&mut self, x: NodeId, from: usize, to: usize) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        assert!(from < to && to <= n, "slice_cols out of range");
        let w = to - from;
        let mut y = self.alloc(m * w);
        for i in 0..m {
            y[i * w..(i + 1) * w].copy_from_slice(&self.nodes[x].data[i * n + from..i * n + to]);
        }
        let needs = self.unary_needs(x);
        self.push(m, w, y, Op::SliceCols { x, from, to }, needs)
    }

    /// [m, n] -> [m, 1] row sums.
    pub fn sum_rows(&mut self, x: NodeId) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m);
        for i in 0..m {
            y[i] = self.nodes[x].data[i * n..(i + 1) * n].iter().sum();
        }
        let needs = self.unary_needs(x);
        self.push(m, 1, y, Op::SumRows(x), needs)
    }

    /// [m, n] -> scalar mean of all entries.
    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.nodes[x].data.iter().sum();
        let len = self.nodes[x].data.len() as f64;
        let mut y = self.alloc(1);
        y[0] = total / len;
        let needs = self.unary_needs(x);
        self.push(1, 1, y, Op::MeanAll(x), needs)
    }

    /// Per-row p-norm, [m, n] -> [m, 1]. The L2 subgradient at the origin is 0.
    pub fn row_pnorm(&mut self, x: NodeId, p: PNorm) -> NodeId {
        let (m, n) = (self.nodes[x].rows, self.nodes[x].cols);
        let mut y = self.alloc(m);
        for i in 0..m {
            let row = &self.nodes[x].data[i * n..(i + 1) * n];
            y[i] = match p {
                PNorm::L1 => row.iter().map(|v| v.abs()).sum(),
                PNorm::L2 => row.iter().map(|v| v * v).sum::<f64>().sqrt(),
            };
        }
        let needs = self.unary_needs(x);
        self.push(m, 1, y, Op::RowPNorm(x, p), needs)
    }

    // ---- backward ----------------------------------------------------

    /// Reverse pass from a scalar loss node. Gradients of earlier backward
    /// calls on the same tape are overwritten, not accumulated; accumulation
    /// across updates happens in `Tensor::accumulate_grad`.
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(
            self.nodes[loss].data.len(),
            1,
            "backward requires a scalar loss node"
        );
        let n_nodes = self.nodes.len();
        let mut live = vec![false; n_nodes];
        live[loss] = true;
        for id in (0..=loss).rev() {
            if !live[id] || !self.nodes[id].needs_grad {
                live[id] = false;
                continue;
            }
            for input in op_inputs(&self.nodes[id].op) {
                live[input] = true;
            }
        }
        for id in 0..n_nodes {
            if live[id] {
                let len = self.nodes[id].data.len();
                let mut g = std::mem::take(&mut self.nodes[id].grad);
                if g.capacity() == 0 {
                    g = self.alloc_zeroed(len);
                } else {
                    g.resize(len, 0.0);
                    g.iter_mut().for_each(|v| *v = 0.0);
                }
                self.nodes[id].grad = g;
            } else {
                self.nodes[id].grad.clear();
            }
        }
        self.nodes[loss].grad[0] = 1.0;

        for id in (0..=loss).rev() {
            if !live[id] {
                continue;
            }
            self.backprop_node(id, &live);
        }
    }

    fn backprop_node(&mut self, id: NodeId, live: &[bool]) {
        // Split borrows: take the output grad out, write into input grads,
        // then put it back.
        let g_out = std::mem::take(&mut self.nodes[id].grad);
        let (rows, cols) = (self.nodes[id].rows, self.nodes[id].cols);
        let op = std::mem::replace(&mut self.nodes[id].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Linear { x, w, b, w_t } => {
                let m = self.nodes[*x].rows;
                let k = self.nodes[*x].cols;
                let out = cols;
                if live[*x] {
                    let x_grad_ptr = *x;
                    let mut gx = std::mem::take(&mut self.nodes[x_grad_ptr].grad);
                    kernels::matmul_acc(&g_out, &self.nodes[*w].data, &mut gx, m, out, k);
                    self.nodes[x_grad_ptr].grad = gx;
                }
                if live[*w] {
                    let mut gw = std::mem::take(&mut self.nodes[*w].grad);
                    kernels::matmul_tn_acc(&g_out, &self.nodes[*x].data, &mut gw, m, out, k);
                    self.nodes[*w].grad = gw;
                }
                if live[*b] {
                    let mut gb = std::mem::take(&mut self.nodes[*b].grad);
                    kernels::col_sum_acc(&g_out, &mut gb, m, out);
                    self.nodes[*b].grad = gb;
                }
                let _ = w_t;
            }
            Op::Tanh(x) => {
                if live[*x] {
                    let mut gx = std::mem::take(&mut self.nodes[*x].grad);
                    let y = &self.dataof(id);
                    for i in 0..gx.len() {
                        gx[i] += g_out[i] * (1.0 - y[i] * y[i]);
                    }
                    self.nodes[*x].grad = gx;
                }
            }
            Op::Relu(x) => {
                if live[*x] {
                    let mut gx = std::mem::take(&mut self.nodes[*x].grad);
                    for i in 0..gx.len() {
                        if self.nodes[*x].data[i] > 0.0 {
                            gx[i] += g_out[i];
                        }
                    }
                    self.nodes[*x].grad = gx;
                }
            }
            Op::Add(a, b) => {
                for &side in &[*a, *b] {
                    if live[side] {
                        let mut g = std::mem::take(&mut self.nodes[side].grad);
                        for i in 0..g.len() {
                            g[i] += g_out[i];
                        }
                        self.nodes[side].grad = g;
                    }
                }
            }
            Op::Sub(a, b) => {
                if live[*a] {
                    let mut g = std::mem::take(&mut self.nodes[*a].grad);
                    for i in 0..g.len() {
                        g[i] += g_out[i];
                    }
                    self.nodes[*a].grad = g;
                }
                if live[*b] {
                    let mut g = std::mem::take(&mut self.nodes[*b].grad);
                    for i in 0..g.len() {
                        g[i] -= g_out[i];
                    }
                    self.nodes[*b].grad = g;
                }
            }
            Op::Mul(a, b) => {
                if live[*a] {
                    let mut g = std::mem::take(&mut self.nodes[*a].grad);
                    for i in 0..g.len() {
                        g[i] += g_out[i] * self.nodes[*b].data[i];
                    }
                    self.nodes[*a].grad = g;
                }
                if live[*b] {
                    let mut g = std::mem::take(&mut self.nodes[*b].grad);
                    for i in 0..g.len() {
                        g[i] += g_out[i] * self.nodes[*a].data[i];
                    }
                    self.nodes[*b].grad = g;
                }
            }
            Op::MinElem(a, b) => {
                for i in 0..g_out.len() {
                    let take_a = self.nodes[*a].data[i] <= self.nodes[*b].data[i];
                    let side = if take_a { *a } else { *b };
                    if live[side] {
                        self.nodes[side].grad[i] += g_out[i];
                    }
                }
            }
            Op::Scale(x, c) => {
                if live[*x] {
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    for i in 0..g.len() {
                        g[i] += g_out[i] * c;
                    }
                    self.nodes[*x].grad = g;
                }
            }
            Op::AddScalar(x) => {
                if live[*x] {
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    for i in 0..g.len() {
                        g[i] += g_out[i];
                    }
                    self.nodes[*x].grad = g;
                }
            }
            Op::Square(x) => {
                if live[*x] {
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    for i in 0..g.len() {
                        g[i] += g_out[i] * 2.0 * self.nodes[*x].data[i];
                    }
                    self.nodes[*x].grad = g;
                }
            }
            Op::Exp(x) => {
                if live[*x] {
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    let y = self.dataof(id);
                    for i in 0..g.len() {
                        g[i] += g_out[i] * y[i];
                    }
                    self.nodes[*x].grad = g;
                }
            }
            Op::Softplus(x) => {
                if live[*x] {
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    for i in 0..g.len() {
                        g[i] += g_out[i] * kernels::sigmoid(self.nodes[*x].data[i]);
                    }
                    self.nodes[*x].grad = g;
                }
            }
            Op::Clamp(x, lo, hi) => {
                if live[*x] {
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    for i in 0..g.len() {
                        let v = self.nodes[*x].data[i];
                        if v >= *lo && v <= *hi {
                            g[i] += g_out[i];
                        }
                    }
                    self.nodes[*x].grad = g;
                }
            }
            Op::ConcatCols(a, b) => {
                let na = self.nodes[*a].cols;
                let nb = self.nodes[*b].cols;
                for i in 0..rows {
                    if live[*a] {
                        for j in 0..na {
                            self.nodes[*a].grad[i * na + j] += g_out[i * cols + j];
                        }
                    }
                    if live[*b] {
                        for j in 0..nb {
                            self.nodes[*b].grad[i * nb + j] += g_out[i * cols + na + j];
                        }
                    }
                }
            }
            Op::SliceCols { x, from, to } => {
                if live[*x] {
                    let n = self.nodes[*x].cols;
                    let w = to - from;
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    for i in 0..rows {
                        for j in 0..w {
                            g[i * n + from + j] += g_out[i * w + j];
                        }
                    }
                    self.nodes[*x].grad = g;
                }
            }
            Op::SumRows(x) => {
                if live[*x] {
                    let n = self.nodes[*x].cols;
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    for i in 0..rows {
                        let gi = g_out[i];
                        for j in 0..n {
                            g[i * n + j] += gi;
                        }
                    }
                    self.nodes[*x].grad = g;
                }
            }
            Op::MeanAll(x) => {
                if live[*x] {
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    let scale = g_out[0] / g.len() as f64;
                    for gv in g.iter_mut() {
                        *gv += scale;
                    }
                    self.nodes[*x].grad = g;
                }
            }
            Op::RowPNorm(x, p) => {
                if live[*x] {
                    let n = self.nodes[*x].cols;
                    let mut g = std::mem::take(&mut self.nodes[*x].grad);
                    for i in 0..rows {
                        let gi = g_out[i];
                        let row = &self.nodes[*x].data[i * n..(i + 1) * n];
                        match p {
                            PNorm::L1 => {
                                for j in 0..n {
                                    let s = if row[j] > 0.0 {
                                        1.0
                                    } else if row[j] < 0.0 {
                                        -1.0
                                    } else {
                                        0.0
                                    };
                                    g[i * n + j] += gi * s;
                                }
                            }
                            PNorm::L2 => {
                                let norm = self.nodes[id].data[i];
                                if norm > 0.0 {
                                    for j in 0..n {
                                        g[i * n + j] += gi * row[j] / norm;
                                    }
                                }
                            }
                        }
                    }
                    self.nodes[*x].grad = g;
                }
            }
        }
        self.nodes[id].op = op;
        self.nodes[id].grad = g_out;
    }

    fn dataof(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].data
    }
}

fn op_inputs(op: &Op) -> Vec<NodeId> {
    match op {
        Op::Leaf => vec![],
        Op::Linear { x, w, b, .. } => vec![*x, *w, *b],
        Op::Tanh(x)
        | Op::Relu(x)
        | Op::Scale(x, _)
        | Op::AddScalar(x)
        | Op::Square(x)
        | Op::Exp(x)
        | Op::Softplus(x)
        | Op::Clamp(x, _, _)
        | Op::SumRows(x)
        | Op::MeanAll(x)
        | Op::RowPNorm(x, _)
        | Op::SliceCols { x, .. } => vec![*x],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MinElem(a, b) | Op::ConcatCols(a, b) => {
            vec![*a, *b]
        }
    }
}
