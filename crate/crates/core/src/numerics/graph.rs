//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Graph`] is an append-only tape: every operation pushes a node holding
//! its forward value, so node indices are already a topological order and
//! [`Graph::backward`] walks them in reverse.

use super::matrix::{self, gemm_nt, gemm_tn, Activation, Matrix};
use super::NumericsError;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation tag recorded for each node.
#[derive(Clone, Debug)]
pub enum Op {
    /// Trainable input.
    Param,
    /// Non-differentiable input.
    Constant,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// r×c plus a 1×c row repeated over every row.
    AddRow(NodeId, NodeId),
    /// r×c times an r×1 column, each row scaled by its entry.
    MulCol(NodeId, NodeId),
    /// `scale * x + shift`.
    Affine { input: NodeId, scale: f64, shift: f64 },
    Activate(NodeId, Activation),
    SoftmaxRows(NodeId),
    LogSoftmaxRows(NodeId),
    Transpose(NodeId),
    /// Same row-major data under a new shape.
    Reshape(NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    GatherRows(NodeId, Vec<usize>),
    /// Selected entries as a k×1 column.
    Pick(NodeId, Vec<(usize, usize)>),
    SumAll(NodeId),
    /// Each row divided by its L2 norm.
    RowNormalize(NodeId),
}

/// One recorded value with its adjoint.
#[derive(Clone, Debug)]
pub struct ComputationNode {
    pub op: Op,
    pub value: Matrix,
    pub adjoint: Option<Matrix>,
    requires_grad: bool,
}

/// Guard added under the square root of [`Op::RowNormalize`].
const NORM_EPS: f64 = 1e-24;

#[derive(Default)]
pub struct Graph {
    nodes: Vec<ComputationNode>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &ComputationNode {
        &self.nodes[id.0]
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Adjoint after [`Graph::backward`]; `None` when the node does not
    /// influence the root.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix> {
        self.nodes[id.0].adjoint.as_ref()
    }

    pub fn grad_or_zeros(&self, id: NodeId) -> Matrix {
        match self.grad(id) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.value(id).shape();
                Matrix::zeros(r, c)
            }
        }
    }

    fn push(&mut self, op: Op, value: Matrix, requires_grad: bool) -> NodeId {
        self.nodes.push(ComputationNode {
            op,
            value,
            adjoint: None,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Param, value, true)
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Constant, value, false)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), NumericsError> {
        if self.shape(a) != self.shape(b) {
            return Err(NumericsError::Dimension {
                op,
                lhs: self.shape(a),
                rhs: self.shape(b),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        let value = matrix::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Sub(a, b), value, rg))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Mul(a, b), value, rg))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, NumericsError> {
        let (r, c) = self.shape(a);
        if self.shape(row) != (1, c) {
            return Err(NumericsError::Dimension {
                op: "add_row",
                lhs: (r, c),
                rhs: self.shape(row),
            });
        }
        let mut value = self.value(a).clone();
        let b = self.value(row).data().to_vec();
        for i in 0..r {
            for (v, bv) in value.row_mut(i).iter_mut().zip(&b) {
                *v += bv;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(Op::AddRow(a, row), value, rg))
    }

    pub fn mul_col(&mut self, a: NodeId, col: NodeId) -> Result<NodeId, NumericsError> {
        let (r, c) = self.shape(a);
        if self.shape(col) != (r, 1) {
            return Err(NumericsError::Dimension {
                op: "mul_col",
                lhs: (r, c),
                rhs: self.shape(col),
            });
        }
        let mut value = self.value(a).clone();
        for i in 0..r {
            let s = self.value(col).data()[i];
            for v in value.row_mut(i) {
                *v *= s;
            }
        }
        let rg = self.rg(a) || self.rg(col);
        Ok(self.push(Op::MulCol(a, col), value, rg))
    }

    pub fn affine(&mut self, input: NodeId, scale: f64, shift: f64) -> NodeId {
        let value = self.value(input).map(|v| scale * v + shift);
        let rg = self.rg(input);
        self.push(Op::Affine { input, scale, shift }, value, rg)
    }

    pub fn scale(&mut self, input: NodeId, scale: f64) -> NodeId {
        self.affine(input, scale, 0.0)
    }

    pub fn activate(&mut self, input: NodeId, kind: Activation) -> NodeId {
        let value = matrix::activation(self.value(input), kind);
        let rg = self.rg(input);
        self.push(Op::Activate(input, kind), value, rg)
    }

    pub fn tanh(&mut self, input: NodeId) -> NodeId {
        self.activate(input, Activation::Tanh)
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        self.activate(input, Activation::Sigmoid)
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        self.activate(input, Activation::Relu)
    }

    pub fn softmax_rows(&mut self, input: NodeId) -> NodeId {
        let value = matrix::softmax_rows(self.value(input));
        let rg = self.rg(input);
        self.push(Op::SoftmaxRows(input), value, rg)
    }

    pub fn log_softmax_rows(&mut self, input: NodeId) -> NodeId {
        let mut value = self.value(input).clone();
        for i in 0..value.rows() {
            matrix::log_softmax_in_place(value.row_mut(i));
        }
        let rg = self.rg(input);
        self.push(Op::LogSoftmaxRows(input), value, rg)
    }

    pub fn transpose(&mut self, input: NodeId) -> NodeId {
        let value = self.value(input).transpose();
        let rg = self.rg(input);
        self.push(Op::Transpose(input), value, rg)
    }

    pub fn reshape(&mut self, input: NodeId, rows: usize, cols: usize) -> Result<NodeId, NumericsError> {
        let shape = self.shape(input);
        if shape.0 * shape.1 != rows * cols {
            return Err(NumericsError::Dimension {
                op: "reshape",
                lhs: shape,
                rhs: (rows, cols),
            });
        }
        let value = Matrix::from_vec(rows, cols, self.value(input).data().to_vec())?;
        let rg = self.rg(input);
        Ok(self.push(Op::Reshape(input), value, rg))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        let cols = parts.first().map_or(0, |&p| self.shape(p).1);
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            if self.shape(p).1 != cols {
                return Err(NumericsError::Dimension {
                    op: "concat_rows",
                    lhs: self.shape(parts[0]),
                    rhs: self.shape(p),
                });
            }
            rows += self.shape(p).0;
            data.extend_from_slice(self.value(p).data());
        }
        let value = Matrix::from_vec(rows, cols, data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Op::ConcatRows(parts.to_vec()), value, rg))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        let rows = parts.first().map_or(0, |&p| self.shape(p).0);
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(NumericsError::Dimension {
                    op: "concat_cols",
                    lhs: self.shape(parts[0]),
                    rhs: self.shape(p),
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p).row(i);
                value.row_mut(i)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value, rg))
    }

    /// Rows `indices` of `input`, repeats allowed.
    pub fn gather_rows(&mut self, input: NodeId, indices: &[usize]) -> Result<NodeId, NumericsError> {
        let (r, c) = self.shape(input);
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            if i >= r {
                return Err(NumericsError::Index {
                    op: "gather_rows",
                    index: i,
                    len: r,
                });
            }
            data.extend_from_slice(self.value(input).row(i));
        }
        let value = Matrix::from_vec(indices.len(), c, data)?;
        let rg = self.rg(input);
        Ok(self.push(Op::GatherRows(input, indices.to_vec()), value, rg))
    }

    pub fn slice_rows(&mut self, input: NodeId, start: usize, end: usize) -> Result<NodeId, NumericsError> {
        let idx: Vec<usize> = (start..end).collect();
        self.gather_rows(input, &idx)
    }

    pub fn pick(&mut self, input: NodeId, entries: &[(usize, usize)]) -> Result<NodeId, NumericsError> {
        let (r, c) = self.shape(input);
        let mut out = Vec::with_capacity(entries.len());
        for &(i, j) in entries {
            if i >= r || j >= c {
                return Err(NumericsError::Index {
                    op: "pick",
                    index: i * c + j,
                    len: r * c,
                });
            }
            out.push(self.value(input)[(i, j)]);
        }
        let rg = self.rg(input);
        Ok(self.push(Op::Pick(input, entries.to_vec()), Matrix::col_vector(&out), rg))
    }

    pub fn sum_all(&mut self, input: NodeId) -> NodeId {
        let value = Matrix::scalar(self.value(input).sum());
        let rg = self.rg(input);
        self.push(Op::SumAll(input), value, rg)
    }

    pub fn row_normalize(&mut self, input: NodeId) -> NodeId {
        let mut value = self.value(input).clone();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            let norm = (matrix::dot(row, row) + NORM_EPS).sqrt();
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        let rg = self.rg(input);
        self.push(Op::RowNormalize(input), value, rg)
    }

    /// Populates adjoints of every node reachable from `root`. Previous
    /// adjoints are cleared first.
    pub fn backward(&mut self, root: NodeId) -> Result<(), NumericsError> {
        if self.shape(root) != (1, 1) {
            return Err(NumericsError::Contract(format!(
                "backward needs a scalar root, got {:?}",
                self.shape(root)
            )));
        }
        for n in &mut self.nodes {
            n.adjoint = None;
        }
        self.nodes[root.0].adjoint = Some(Matrix::scalar(1.0));

        for idx in (0..=root.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(upstream) = self.nodes[idx].adjoint.take() else {
                continue;
            };
            let op = self.nodes[idx].op.clone();
            self.propagate(idx, &op, &upstream);
            self.nodes[idx].adjoint = Some(upstream);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, grad: Matrix) {
        if !self.rg(id) {
            return;
        }
        match &mut self.nodes[id.0].adjoint {
            Some(existing) => existing.add_assign(&grad),
            slot @ None => *slot = Some(grad),
        }
    }

    fn propagate(&mut self, idx: usize, op: &Op, up: &Matrix) {
        match *op {
            Op::Param | Op::Constant => {}
            Op::MatMul(a, b) => {
                if self.rg(a) {
                    let mut ga = Matrix::zeros(self.shape(a).0, self.shape(a).1);
                    gemm_nt(up, self.value(b), &mut ga);
                    self.accumulate(a, ga);
                }
                if self.rg(b) {
                    let mut gb = Matrix::zeros(self.shape(b).0, self.shape(b).1);
                    gemm_tn(self.value(a), up, &mut gb);
                    self.accumulate(b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(a, up.clone());
                self.accumulate(b, up.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(a, up.clone());
                self.accumulate(b, up.map(|v| -v));
            }
            Op::Mul(a, b) => {
                if self.rg(a) {
                    let g = up.zip_map(self.value(b), |u, y| u * y);
                    self.accumulate(a, g);
                }
                if self.rg(b) {
                    let g = up.zip_map(self.value(a), |u, x| u * x);
                    self.accumulate(b, g);
                }
            }
            Op::AddRow(a, row) => {
                self.accumulate(a, up.clone());
                if self.rg(row) {
                    let mut g = Matrix::zeros(1, up.cols());
                    for i in 0..up.rows() {
                        for (acc, u) in g.data_mut().iter_mut().zip(up.row(i)) {
                            *acc += u;
                        }
                    }
                    self.accumulate(row, g);
                }
            }
            Op::MulCol(a, col) => {
                if self.rg(a) {
                    let mut g = up.clone();
                    for i in 0..g.rows() {
                        let s = self.value(col).data()[i];
                        for v in g.row_mut(i) {
                            *v *= s;
                        }
                    }
                    self.accumulate(a, g);
                }
                if self.rg(col) {
                    let av = self.value(a);
                    let g: Vec<f64> = (0..up.rows())
                        .map(|i| matrix::dot(up.row(i), av.row(i)))
                        .collect();
                    self.accumulate(col, Matrix::col_vector(&g));
                }
            }
            Op::Affine { input, scale, .. } => {
                self.accumulate(input, up.map(|u| u * scale));
            }
            Op::Activate(input, kind) => {
                let x = self.value(input);
                let y = &self.nodes[idx].value;
                let mut g = up.clone();
                for ((gv, &xv), &yv) in g.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
                    *gv *= kind.derivative(xv, yv);
                }
                self.accumulate(input, g);
            }
            Op::SoftmaxRows(input) => {
                let y = &self.nodes[idx].value;
                let mut g = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, ur) = (y.row(i), up.row(i));
                    let inner = matrix::dot(yr, ur);
                    for (j, gv) in g.row_mut(i).iter_mut().enumerate() {
                        *gv = yr[j] * (ur[j] - inner);
                    }
                }
                self.accumulate(input, g);
            }
            Op::LogSoftmaxRows(input) => {
                let y = &self.nodes[idx].value;
                let mut g = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, ur) = (y.row(i), up.row(i));
                    let total: f64 = ur.iter().sum();
                    for (j, gv) in g.row_mut(i).iter_mut().enumerate() {
                        *gv = ur[j] - yr[j].exp() * total;
                    }
                }
                self.accumulate(input, g);
            }
            Op::Transpose(input) => {
                self.accumulate(input, up.transpose());
            }
            Op::Reshape(input) => {
                let (r, c) = self.shape(input);
                let g = Matrix::from_vec(r, c, up.data().to_vec()).expect("reshape preserves length");
                self.accumulate(input, g);
            }
            Op::ConcatRows(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.rg(p) {
                        let g = Matrix::from_vec(r, c, up.data()[offset * c..(offset + r) * c].to_vec())
                            .expect("slice matches part shape");
                        self.accumulate(p, g);
                    }
                    offset += r;
                }
            }
            Op::ConcatCols(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.rg(p) {
                        let mut g = Matrix::zeros(r, c);
                        for i in 0..r {
                            g.row_mut(i).copy_from_slice(&up.row(i)[offset..offset + c]);
                        }
                        self.accumulate(p, g);
                    }
                    offset += c;
                }
            }
            Op::GatherRows(input, ref indices) => {
                let (r, c) = self.shape(input);
                let mut g = Matrix::zeros(r, c);
                for (k, &i) in indices.iter().enumerate() {
                    for (gv, u) in g.row_mut(i).iter_mut().zip(up.row(k)) {
                        *gv += u;
                    }
                }
                self.accumulate(input, g);
            }
            Op::Pick(input, ref entries) => {
                let (r, c) = self.shape(input);
                let mut g = Matrix::zeros(r, c);
                for (k, &(i, j)) in entries.iter().enumerate() {
                    g[(i, j)] += up.data()[k];
                }
                self.accumulate(input, g);
            }
            Op::SumAll(input) => {
                let (r, c) = self.shape(input);
                self.accumulate(input, Matrix::filled(r, c, up.item()));
            }
            Op::RowNormalize(input) => {
                let x = self.value(input);
                let y = &self.nodes[idx].value;
                let mut g = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let norm = (matrix::dot(x.row(i), x.row(i)) + NORM_EPS).sqrt();
                    let inner = matrix::dot(y.row(i), up.row(i));
                    for (j, gv) in g.row_mut(i).iter_mut().enumerate() {
                        *gv = (up.row(i)[j] - y.row(i)[j] * inner) / norm;
                    }
                }
                self.accumulate(input, g);
            }
        }
    }
}
