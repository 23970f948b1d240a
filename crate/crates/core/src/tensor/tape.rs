//! Reverse-mode automatic differentiation on a per-document tape.
//!
//! A [`Tape`] records every operation eagerly as it is built; [`Var`] is a
//! cheap copyable handle into the tape. Calling [`Tape::backward`] on a 1x1
//! loss walks the recorded nodes in reverse and accumulates gradients for
//! every node, including parameter leaves leased from a
//! [`ParamStore`](super::ParamStore).
//!
//! Tapes are deliberately not shared across threads: parameters live in a
//! thread-safe store, and each worker builds its own tape per document.
//!
//! Every op validates shapes (panicking on mismatch, which is a programming
//! error) and checks that its output is finite. A non-finite output raises a
//! panic whose payload is [`TensorError::NonFiniteValue`], so a harness can
//! catch it, report which op diverged, and exit cleanly instead of writing
//! garbage artifacts.

use std::cell::RefCell;
use std::ops::{Add, Mul, Neg, Sub};
use std::rc::Rc;

use super::matrix::Matrix;
use super::store::{GradStore, ParamId, ParamStore};

/// Errors surfaced by the differentiable layer.
///
/// `NonFiniteValue` is also used as a panic payload (via
/// `std::panic::panic_any`) when an op produces NaN or infinity, so callers
/// that need to translate numeric faults into exit codes can downcast to it.
#[derive(Debug, Clone, thiserror::Error)]
pub enum TensorError {
    #[error("backward requires a 1x1 loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("non-finite value produced by op `{op}`: {detail}")]
    NonFiniteValue { op: &'static str, detail: String },
}

/// One recorded operation. Inputs are node indices into the same tape.
enum Op {
    /// Constant or input leaf; no gradient flows past it.
    Leaf,
    /// Leaf leased from a parameter store; gradients are exported for it.
    Param,
    Add(usize, usize),
    Sub(usize, usize),
    /// Element-wise (Hadamard) product.
    Mul(usize, usize),
    /// `scale * x + shift`, element-wise, with constant coefficients (the
    /// shift does not appear in the gradient, so only the scale is stored).
    AffineConst { x: usize, scale: f64 },
    Matmul(usize, usize),
    Transpose(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceCols { x: usize, start: usize, len: usize },
    /// `out[k, :] = x[idx[k], :]`.
    GatherRows { x: usize, idx: Rc<Vec<usize>> },
    /// `out[idx[k], :] += x[k, :]` into a zero matrix with `out_rows` rows.
    ScatterAddRows { x: usize, idx: Rc<Vec<usize>> },
    /// `out[i, :] = x[i, :] * w[i, 0]` where `w` is a column vector.
    ScaleRows { x: usize, w: usize },
    /// `out[i, :] = x[i, :] + b[0, :]` where `b` is a single row.
    AddRowBroadcast { x: usize, b: usize },
    /// `max(x, 0) + slope * min(x, 0)`; slope 0 is ReLU.
    LeakyRelu { x: usize, slope: f64 },
    Sigmoid(usize),
    /// Softmax independently over each row.
    RowSoftmax(usize),
    /// Softmax over groups of rows of a column vector. `seg[k]` is the group
    /// of row `k`; groups may be empty (they simply produce no rows).
    SegmentSoftmax { x: usize, seg: Rc<Vec<usize>> },
    /// `out[g, 0] = log sum_{k: seg[k]=g} exp(x[k, 0])`. Every group must be
    /// non-empty (an empty group would be log 0).
    SegmentLogSumExp { x: usize, seg: Rc<Vec<usize>> },
    /// Sum of all entries, 1x1.
    Sum(usize),
    /// Mean of all entries, 1x1.
    Mean(usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Param => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AffineConst { .. } => "affine_const",
            Op::Matmul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::ConcatCols(..) => "concat_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::SliceCols { .. } => "slice_cols",
            Op::GatherRows { .. } => "gather_rows",
            Op::ScatterAddRows { .. } => "scatter_add_rows",
            Op::ScaleRows { .. } => "scale_rows",
            Op::AddRowBroadcast { .. } => "add_row_broadcast",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::RowSoftmax(..) => "row_softmax",
            Op::SegmentSoftmax { .. } => "segment_softmax",
            Op::SegmentLogSumExp { .. } => "segment_log_sum_exp",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
        }
    }
}

struct Node {
    value: Rc<Matrix>,
    op: Op,
}

/// Recording tape for one forward/backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    /// Parameters leased into this tape, in lease order.
    leased: RefCell<Vec<(ParamId, usize)>>,
}

/// Handle to a tape node. Copyable; all arithmetic goes through the tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

/// Gradients of one backward pass, indexed by tape node.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`, if any path reached it.
    pub fn wrt(&self, v: Var<'_>) -> Option<&Matrix> {
        self.grads[v.id].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of recorded nodes (useful for memory diagnostics in tests).
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Matrix, op: Op) -> Var<'_> {
        if !value.all_finite() {
            let detail = format!(
                "output shape {:?}; first offending entry at index {:?}",
                value.shape(),
                value.data().iter().position(|x| !x.is_finite())
            );
            std::panic::panic_any(TensorError::NonFiniteValue { op: op.name(), detail });
        }
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        nodes.push(Node { value: Rc::new(value), op });
        Var { tape: self, id }
    }

    fn value_of(&self, id: usize) -> Rc<Matrix> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Record a constant leaf. No gradient is tracked past it.
    pub fn leaf(&self, value: Matrix) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    /// Lease a parameter: copies its current value onto the tape and records
    /// the association so its gradient can be exported after backward.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        let v = self.push(store.value(id).clone(), Op::Param);
        self.leased.borrow_mut().push((id, v.id));
        v
    }

    /// Current value of a node (cheap; values are reference-counted).
    pub fn value(&self, v: Var<'_>) -> Rc<Matrix> {
        self.value_of(v.id)
    }

    /// Concatenate matrices left-to-right. All inputs must share a row count.
    pub fn concat_cols<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty(), "concat_cols needs at least one input");
        let mats: Vec<Rc<Matrix>> = parts.iter().map(|p| self.value_of(p.id)).collect();
        let rows = mats[0].rows();
        let total: usize = mats.iter().map(|m| m.cols()).sum();
        let mut out = Matrix::zeros(rows, total);
        let mut col = 0;
        for m in &mats {
            assert_eq!(m.rows(), rows, "concat_cols row mismatch: {} vs {}", m.rows(), rows);
            for i in 0..rows {
                out.row_mut(i)[col..col + m.cols()].copy_from_slice(m.row(i));
            }
            col += m.cols();
        }
        self.push(out, Op::ConcatCols(parts.iter().map(|p| p.id).collect()))
    }

    /// Stack matrices top-to-bottom. All inputs must share a column count.
    pub fn concat_rows<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty(), "concat_rows needs at least one input");
        let mats: Vec<Rc<Matrix>> = parts.iter().map(|p| self.value_of(p.id)).collect();
        let cols = mats[0].cols();
        let total: usize = mats.iter().map(|m| m.rows()).sum();
        let mut data = Vec::with_capacity(total * cols);
        for m in &mats {
            assert_eq!(m.cols(), cols, "concat_rows col mismatch: {} vs {}", m.cols(), cols);
            data.extend_from_slice(m.data());
        }
        self.push(
            Matrix::from_vec(total, cols, data),
            Op::ConcatRows(parts.iter().map(|p| p.id).collect()),
        )
    }

    /// Reverse pass from a 1x1 loss node.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, TensorError> {
        let nodes = self.nodes.borrow();
        let loss_shape = nodes[loss.id].value.shape();
        if loss_shape != (1, 1) {
            return Err(TensorError::NonScalarLoss { rows: loss_shape.0, cols: loss_shape.1 });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Matrix::scalar(1.0));

        // Accumulate `delta` into the gradient slot of node `id`.
        fn accum(grads: &mut [Option<Matrix>], id: usize, delta: Matrix) {
            match &mut grads[id] {
                Some(g) => g.add_scaled_assign(&delta, 1.0),
                slot @ None => *slot = Some(delta),
            }
        }

        for id in (0..nodes.len()).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &nodes[id];
            match &node.op {
                Op::Leaf | Op::Param => {
                    // Terminal: restore the gradient for later export.
                    grads[id] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    accum(&mut grads, *a, g.clone());
                    accum(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accum(&mut grads, *b, g.map(|x| -x));
                    accum(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let va = &nodes[*a].value;
                    let vb = &nodes[*b].value;
                    accum(&mut grads, *a, g.zip_map(vb, |gi, bi| gi * bi));
                    accum(&mut grads, *b, g.zip_map(va, |gi, ai| gi * ai));
                }
                Op::AffineConst { x, scale, .. } => {
                    accum(&mut grads, *x, g.map(|gi| gi * scale));
                }
                Op::Matmul(a, b) => {
                    let va = &nodes[*a].value;
                    let vb = &nodes[*b].value;
                    accum(&mut grads, *a, g.matmul(&vb.transpose()));
                    accum(&mut grads, *b, va.transpose().matmul(&g));
                }
                Op::Transpose(x) => {
                    accum(&mut grads, *x, g.transpose());
                }
                Op::ConcatCols(parts) => {
                    let mut col = 0;
                    for &p in parts {
                        let w = nodes[p].value.cols();
                        let mut part = Matrix::zeros(g.rows(), w);
                        for i in 0..g.rows() {
                            part.row_mut(i).copy_from_slice(&g.row(i)[col..col + w]);
                        }
                        accum(&mut grads, p, part);
                        col += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut row = 0;
                    for &p in parts {
                        let h = nodes[p].value.rows();
                        let mut part = Matrix::zeros(h, g.cols());
                        for i in 0..h {
                            part.row_mut(i).copy_from_slice(g.row(row + i));
                        }
                        accum(&mut grads, p, part);
                        row += h;
                    }
                }
                Op::SliceCols { x, start, len } => {
                    let vx = &nodes[*x].value;
                    let mut dx = Matrix::zeros(vx.rows(), vx.cols());
                    for i in 0..g.rows() {
                        dx.row_mut(i)[*start..*start + *len].copy_from_slice(g.row(i));
                    }
                    accum(&mut grads, *x, dx);
                }
                Op::GatherRows { x, idx } => {
                    let vx = &nodes[*x].value;
                    let mut dx = Matrix::zeros(vx.rows(), vx.cols());
                    for (k, &src) in idx.iter().enumerate() {
                        let row = g.row(k).to_vec();
                        for (d, s) in dx.row_mut(src).iter_mut().zip(row) {
                            *d += s;
                        }
                    }
                    accum(&mut grads, *x, dx);
                }
                Op::ScatterAddRows { x, idx } => {
                    let vx = &nodes[*x].value;
                    let mut dx = Matrix::zeros(vx.rows(), vx.cols());
                    for (k, &dst) in idx.iter().enumerate() {
                        dx.row_mut(k).copy_from_slice(g.row(dst));
                    }
                    accum(&mut grads, *x, dx);
                }
                Op::ScaleRows { x, w } => {
                    let vx = &nodes[*x].value;
                    let vw = &nodes[*w].value;
                    let mut dx = Matrix::zeros(vx.rows(), vx.cols());
                    let mut dw = Matrix::zeros(vw.rows(), 1);
                    for i in 0..vx.rows() {
                        let wi = vw.get(i, 0);
                        let mut dot = 0.0;
                        for j in 0..vx.cols() {
                            dx.set(i, j, g.get(i, j) * wi);
                            dot += g.get(i, j) * vx.get(i, j);
                        }
                        dw.set(i, 0, dot);
                    }
                    accum(&mut grads, *x, dx);
                    accum(&mut grads, *w, dw);
                }
                Op::AddRowBroadcast { x, b } => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for j in 0..g.cols() {
                            db.set(0, j, db.get(0, j) + g.get(i, j));
                        }
                    }
                    accum(&mut grads, *x, g.clone());
                    accum(&mut grads, *b, db);
                }
                Op::LeakyRelu { x, slope } => {
                    let vx = &nodes[*x].value;
                    accum(&mut grads, *x, g.zip_map(vx, |gi, xi| if xi > 0.0 { gi } else { gi * slope }));
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    accum(&mut grads, *x, g.zip_map(y, |gi, yi| gi * yi * (1.0 - yi)));
                }
                Op::RowSoftmax(x) => {
                    let y = &node.value;
                    let mut dx = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let dot: f64 =
                            (0..y.cols()).map(|j| g.get(i, j) * y.get(i, j)).sum();
                        for j in 0..y.cols() {
                            dx.set(i, j, y.get(i, j) * (g.get(i, j) - dot));
                        }
                    }
                    accum(&mut grads, *x, dx);
                }
                Op::SegmentSoftmax { x, seg } => {
                    let y = &node.value;
                    let groups = seg.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dots = vec![0.0; groups];
                    for (k, &gid) in seg.iter().enumerate() {
                        dots[gid] += g.get(k, 0) * y.get(k, 0);
                    }
                    let mut dx = Matrix::zeros(y.rows(), 1);
                    for (k, &gid) in seg.iter().enumerate() {
                        dx.set(k, 0, y.get(k, 0) * (g.get(k, 0) - dots[gid]));
                    }
                    accum(&mut grads, *x, dx);
                }
                Op::SegmentLogSumExp { x, seg } => {
                    let vx = &nodes[*x].value;
                    let out = &node.value;
                    let mut dx = Matrix::zeros(vx.rows(), 1);
                    for (k, &gid) in seg.iter().enumerate() {
                        // softmax weight of element k within its group
                        let w = (vx.get(k, 0) - out.get(gid, 0)).exp();
                        dx.set(k, 0, g.get(gid, 0) * w);
                    }
                    accum(&mut grads, *x, dx);
                }
                Op::Sum(x) => {
                    let vx = &nodes[*x].value;
                    let s = g.item();
                    accum(&mut grads, *x, Matrix::filled(vx.rows(), vx.cols(), s));
                }
                Op::Mean(x) => {
                    let vx = &nodes[*x].value;
                    let s = g.item() / vx.len() as f64;
                    accum(&mut grads, *x, Matrix::filled(vx.rows(), vx.cols(), s));
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Export leased-parameter gradients into a dense store-aligned layout.
    /// Parameters never leased (or unreached by the loss) get zero gradients.
    pub fn param_grads(&self, grads: &Gradients, store: &ParamStore) -> GradStore {
        let mut out = GradStore::zeros_like(store);
        for &(pid, node_id) in self.leased.borrow().iter() {
            if let Some(g) = grads.grads[node_id].as_ref() {
                out.accumulate(pid, g);
            }
        }
        out
    }
}

impl<'t> Var<'t> {
    fn unary(self, f: impl FnOnce(&Matrix) -> Matrix, op: Op) -> Var<'t> {
        let v = self.tape.value_of(self.id);
        self.tape.push(f(&v), op)
    }

    pub fn shape(self) -> (usize, usize) {
        self.tape.value_of(self.id).shape()
    }

    /// Snapshot of this node's value.
    pub fn value(self) -> Rc<Matrix> {
        self.tape.value_of(self.id)
    }

    /// Matrix product.
    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        let a = self.tape.value_of(self.id);
        let b = self.tape.value_of(other.id);
        self.tape.push(a.matmul(&b), Op::Matmul(self.id, other.id))
    }

    pub fn transpose(self) -> Var<'t> {
        self.unary(Matrix::transpose, Op::Transpose(self.id))
    }

    /// `scale * x + shift` with constant coefficients.
    pub fn affine(self, scale: f64, shift: f64) -> Var<'t> {
        self.unary(
            |m| m.map(|x| scale * x + shift),
            Op::AffineConst { x: self.id, scale },
        )
    }

    pub fn scale(self, scale: f64) -> Var<'t> {
        self.affine(scale, 0.0)
    }

    pub fn relu(self) -> Var<'t> {
        self.leaky_relu(0.0)
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'t> {
        self.unary(
            |m| m.map(|x| if x > 0.0 { x } else { slope * x }),
            Op::LeakyRelu { x: self.id, slope },
        )
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(|m| m.map(|x| 1.0 / (1.0 + (-x).exp())), Op::Sigmoid(self.id))
    }

    /// Softmax over each row independently.
    pub fn row_softmax(self) -> Var<'t> {
        self.unary(
            |m| {
                let mut out = Matrix::zeros(m.rows(), m.cols());
                for i in 0..m.rows() {
                    let row = m.row(i);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for j in 0..m.cols() {
                        let e = (row[j] - max).exp();
                        out.set(i, j, e);
                        sum += e;
                    }
                    for j in 0..m.cols() {
                        out.set(i, j, out.get(i, j) / sum);
                    }
                }
                out
            },
            Op::RowSoftmax(self.id),
        )
    }

    /// Softmax over groups of rows of a column vector. `seg[k]` assigns row
    /// `k` to a group; within each group the outputs sum to 1. Groups that
    /// receive no rows simply do not appear.
    pub fn segment_softmax(self, seg: Rc<Vec<usize>>) -> Var<'t> {
        let m = self.tape.value_of(self.id);
        assert_eq!(m.cols(), 1, "segment_softmax requires a column vector");
        assert_eq!(m.rows(), seg.len(), "segment ids must cover every row");
        let groups = seg.iter().copied().max().map_or(0, |x| x + 1);
        let mut maxes = vec![f64::NEG_INFINITY; groups];
        for (k, &gid) in seg.iter().enumerate() {
            maxes[gid] = maxes[gid].max(m.get(k, 0));
        }
        let mut sums = vec![0.0; groups];
        let mut out = Matrix::zeros(m.rows(), 1);
        for (k, &gid) in seg.iter().enumerate() {
            let e = (m.get(k, 0) - maxes[gid]).exp();
            out.set(k, 0, e);
            sums[gid] += e;
        }
        for (k, &gid) in seg.iter().enumerate() {
            out.set(k, 0, out.get(k, 0) / sums[gid]);
        }
        self.tape.push(out, Op::SegmentSoftmax { x: self.id, seg })
    }

    /// Per-group log-sum-exp of a column vector; output has one row per
    /// group. Panics if any group in `0..groups` has no member.
    pub fn segment_log_sum_exp(self, seg: Rc<Vec<usize>>, groups: usize) -> Var<'t> {
        let m = self.tape.value_of(self.id);
        assert_eq!(m.cols(), 1, "segment_log_sum_exp requires a column vector");
        assert_eq!(m.rows(), seg.len(), "segment ids must cover every row");
        let mut maxes = vec![f64::NEG_INFINITY; groups];
        for (k, &gid) in seg.iter().enumerate() {
            assert!(gid < groups, "segment id {} out of range {}", gid, groups);
            maxes[gid] = maxes[gid].max(m.get(k, 0));
        }
        assert!(
            maxes.iter().all(|x| x.is_finite()),
            "segment_log_sum_exp: every group must have at least one member"
        );
        let mut sums = vec![0.0; groups];
        for (k, &gid) in seg.iter().enumerate() {
            sums[gid] += (m.get(k, 0) - maxes[gid]).exp();
        }
        let out = Matrix::from_vec(
            groups,
            1,
            maxes.iter().zip(&sums).map(|(m, s)| m + s.ln()).collect(),
        );
        self.tape.push(out, Op::SegmentLogSumExp { x: self.id, seg })
    }

    /// Select `len` columns starting at `start`.
    pub fn slice_cols(self, start: usize, len: usize) -> Var<'t> {
        let m = self.tape.value_of(self.id);
        assert!(start + len <= m.cols(), "slice_cols out of range");
        let mut out = Matrix::zeros(m.rows(), len);
        for i in 0..m.rows() {
            out.row_mut(i).copy_from_slice(&m.row(i)[start..start + len]);
        }
        self.tape.push(out, Op::SliceCols { x: self.id, start, len })
    }

    /// `out[k, :] = x[idx[k], :]`. Indices may repeat.
    pub fn gather_rows(self, idx: Rc<Vec<usize>>) -> Var<'t> {
        let m = self.tape.value_of(self.id);
        let mut out = Matrix::zeros(idx.len(), m.cols());
        for (k, &src) in idx.iter().enumerate() {
            assert!(src < m.rows(), "gather_rows index {} out of range {}", src, m.rows());
            out.row_mut(k).copy_from_slice(m.row(src));
        }
        self.tape.push(out, Op::GatherRows { x: self.id, idx })
    }

    /// Scatter-add rows of `self` into a zero matrix with `out_rows` rows:
    /// `out[idx[k], :] += self[k, :]`. Rows not referenced stay zero.
    pub fn scatter_add_rows(self, idx: Rc<Vec<usize>>, out_rows: usize) -> Var<'t> {
        let m = self.tape.value_of(self.id);
        assert_eq!(m.rows(), idx.len(), "scatter_add_rows needs one index per row");
        let mut out = Matrix::zeros(out_rows, m.cols());
        for (k, &dst) in idx.iter().enumerate() {
            assert!(dst < out_rows, "scatter index {} out of range {}", dst, out_rows);
            for (d, &s) in out.row_mut(dst).iter_mut().zip(m.row(k)) {
                *d += s;
            }
        }
        self.tape.push(out, Op::ScatterAddRows { x: self.id, idx })
    }

    /// `out[i, :] = x[i, :] * w[i, 0]` with `w` a column vector.
    pub fn scale_rows(self, w: Var<'t>) -> Var<'t> {
        let m = self.tape.value_of(self.id);
        let wv = self.tape.value_of(w.id);
        assert_eq!(wv.shape(), (m.rows(), 1), "scale_rows weight must be rows x 1");
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            let wi = wv.get(i, 0);
            for (o, &x) in out.row_mut(i).iter_mut().zip(m.row(i)) {
                *o = x * wi;
            }
        }
        self.tape.push(out, Op::ScaleRows { x: self.id, w: w.id })
    }

    /// Add a single-row bias to every row.
    pub fn add_row(self, b: Var<'t>) -> Var<'t> {
        let m = self.tape.value_of(self.id);
        let bv = self.tape.value_of(b.id);
        assert_eq!(bv.shape(), (1, m.cols()), "bias row must be 1 x cols");
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out.set(i, j, m.get(i, j) + bv.get(0, j));
            }
        }
        self.tape.push(out, Op::AddRowBroadcast { x: self.id, b: b.id })
    }

    pub fn sum(self) -> Var<'t> {
        self.unary(|m| Matrix::scalar(m.sum()), Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t> {
        self.unary(|m| Matrix::scalar(m.sum() / m.len() as f64), Op::Mean(self.id))
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        let a = self.tape.value_of(self.id);
        let b = self.tape.value_of(rhs.id);
        self.tape.push(a.zip_map(&b, |x, y| x + y), Op::Add(self.id, rhs.id))
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        let a = self.tape.value_of(self.id);
        let b = self.tape.value_of(rhs.id);
        self.tape.push(a.zip_map(&b, |x, y| x - y), Op::Sub(self.id, rhs.id))
    }
}

/// Element-wise (Hadamard) product.
impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        let a = self.tape.value_of(self.id);
        let b = self.tape.value_of(rhs.id);
        self.tape.push(a.zip_map(&b, |x, y| x * y), Op::Mul(self.id, rhs.id))
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}
