//! Graph convolution over the association matrix: `H_l = relu(A·H_{l-1}·W_l + b_l)`.
//!
//! There is no degree normalisation; `A` is used as built.

use serde::{Deserialize, Serialize};

use super::{constant, AedError};
use crate::numerics::{Graph, Matrix, NodeId};

/// One layer: `w` is h×h, `b` is 1×h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnLayerParams<T = Matrix> {
    pub w: T,
    pub b: T,
}

impl<T> GcnLayerParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> GcnLayerParams<U> {
        GcnLayerParams { w: f(&self.w), b: f(&self.b) }
    }
}

impl GcnLayerParams<Matrix> {
    pub fn zeros(h: usize) -> Self {
        Self {
            w: Matrix::zeros(h, h),
            b: Matrix::zeros(1, h),
        }
    }
}

pub fn gcn_graph(g: &mut Graph, a: NodeId, states: NodeId, layers: &[GcnLayerParams<NodeId>]) -> Result<NodeId, AedError> {
    if layers.is_empty() {
        return Err(AedError::Contract("graph convolution needs at least one layer".into()));
    }
    let mut h = states;
    for layer in layers {
        let projected = g.matmul(h, layer.w)?;
        let gathered = g.matmul(a, projected)?;
        let shifted = g.add_row(gathered, layer.b)?;
        h = g.relu(shifted);
    }
    Ok(h)
}

pub fn gcn_forward(a: &Matrix, states: &Matrix, layers: &[GcnLayerParams]) -> Result<Matrix, AedError> {
    let mut g = Graph::new();
    let an = constant(&mut g, a);
    let h = constant(&mut g, states);
    let ls: Vec<_> = layers.iter().map(|l| l.map(|m| constant(&mut g, m))).collect();
    let out = gcn_graph(&mut g, an, h, &ls)?;
    Ok(g.value(out).clone())
}
