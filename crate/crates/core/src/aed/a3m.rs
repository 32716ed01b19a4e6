//! Aspect-aware attention: every position attends over the candidate aspect
//! states, and a learned scalar gate mixes the position's own state with its
//! attended aspect context.

use serde::{Deserialize, Serialize};

use super::{constant, AedError};
use crate::numerics::{Graph, Matrix, NodeId};

/// Attention and gate parameters for hidden size h (states are rows, `x·W`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A3mParams<T = Matrix> {
    /// h×h projection of candidate states.
    pub w_ca: T,
    /// 1×h.
    pub b_ca: T,
    /// h×h projection of the attending state.
    pub w_h: T,
    /// 1×h.
    pub b_h: T,
    /// h×1 scorer over the joint feature `tanh(P_i + Q_t)`.
    pub w_alpha: T,
    /// 1×1.
    pub b_alpha: T,
    /// 2h×1 gate weights over `[h_t·W1 ; h_A·W2]`.
    pub w_beta: T,
    /// h×h.
    pub w_1: T,
    /// h×h.
    pub w_2: T,
    /// 1×1.
    pub b_beta: T,
}

impl<T> A3mParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> A3mParams<U> {
        A3mParams {
            w_ca: f(&self.w_ca),
            b_ca: f(&self.b_ca),
            w_h: f(&self.w_h),
            b_h: f(&self.b_h),
            w_alpha: f(&self.w_alpha),
            b_alpha: f(&self.b_alpha),
            w_beta: f(&self.w_beta),
            w_1: f(&self.w_1),
            w_2: f(&self.w_2),
            b_beta: f(&self.b_beta),
        }
    }

    pub fn fields(&self) -> [(&'static str, &T); 10] {
        [
            ("w_ca", &self.w_ca),
            ("b_ca", &self.b_ca),
            ("w_h", &self.w_h),
            ("b_h", &self.b_h),
            ("w_alpha", &self.w_alpha),
            ("b_alpha", &self.b_alpha),
            ("w_beta", &self.w_beta),
            ("w_1", &self.w_1),
            ("w_2", &self.w_2),
            ("b_beta", &self.b_beta),
        ]
    }
}

impl A3mParams<Matrix> {
    /// (rows, cols) of every field for hidden size `h`, in [`A3mParams::fields`] order.
    pub fn shapes(h: usize) -> [(&'static str, (usize, usize)); 10] {
        [
            ("w_ca", (h, h)),
            ("b_ca", (1, h)),
            ("w_h", (h, h)),
            ("b_h", (1, h)),
            ("w_alpha", (h, 1)),
            ("b_alpha", (1, 1)),
            ("w_beta", (2 * h, 1)),
            ("w_1", (h, h)),
            ("w_2", (h, h)),
            ("b_beta", (1, 1)),
        ]
    }

    pub fn zeros(h: usize) -> Self {
        let [s0, s1, s2, s3, s4, s5, s6, s7, s8, s9] = Self::shapes(h).map(|(_, (r, c))| Matrix::zeros(r, c));
        Self {
            w_ca: s0,
            b_ca: s1,
            w_h: s2,
            b_h: s3,
            w_alpha: s4,
            b_alpha: s5,
            w_beta: s6,
            w_1: s7,
            w_2: s8,
            b_beta: s9,
        }
    }
}

/// Tape handles produced by [`a3m_graph`].
#[derive(Clone, Copy, Debug)]
pub struct A3mNodes {
    /// L×h gated states.
    pub hat: NodeId,
    /// L×k attention weights over the candidates.
    pub attention: NodeId,
    /// L×1 gate values.
    pub gate: NodeId,
}

/// Values produced by [`a3m_attend`].
#[derive(Clone, Debug, PartialEq)]
pub struct A3mOutput {
    pub hat: Matrix,
    pub attention: Matrix,
    pub gate: Matrix,
}

/// Records the attention block on `g` for states `h` (L×h) with the
/// candidate rows `candidates`.
pub fn a3m_graph(g: &mut Graph, h: NodeId, candidates: &[usize], p: &A3mParams<NodeId>) -> Result<A3mNodes, AedError> {
    if candidates.is_empty() {
        return Err(AedError::Contract("aspect attention needs at least one candidate".into()));
    }
    let len = g.value(h).rows();
    if let Some(&bad) = candidates.iter().find(|&&c| c >= len) {
        return Err(AedError::Contract(format!("candidate {bad} outside {len} states")));
    }
    let k = candidates.len();

    let cand = g.gather_rows(h, candidates)?;
    let cand_proj = g.matmul(cand, p.w_ca)?;
    let cand_proj = g.add_row(cand_proj, p.b_ca)?;
    let state_proj = g.matmul(h, p.w_h)?;
    let state_proj = g.add_row(state_proj, p.b_h)?;

    // Joint feature tanh(P_i + Q_t) for every (position, candidate) pair,
    // laid out row-major so the scores reshape straight to L×k.
    let pair_cand: Vec<usize> = (0..len).flat_map(|_| 0..k).collect();
    let pair_state: Vec<usize> = (0..len).flat_map(|t| std::iter::repeat_n(t, k)).collect();
    let cand_rows = g.gather_rows(cand_proj, &pair_cand)?;
    let state_rows = g.gather_rows(state_proj, &pair_state)?;
    let joint = g.add(cand_rows, state_rows)?;
    let joint = g.tanh(joint);
    let scores = g.matmul(joint, p.w_alpha)?;
    let scores = g.add_row(scores, p.b_alpha)?;
    let scores = g.reshape(scores, len, k)?;
    let attention = g.softmax_rows(scores);

    let context = g.matmul(attention, cand)?;

    let own = g.matmul(h, p.w_1)?;
    let ctx = g.matmul(context, p.w_2)?;
    let joined = g.concat_cols(&[own, ctx])?;
    let gate_logit = g.matmul(joined, p.w_beta)?;
    let gate_logit = g.add_row(gate_logit, p.b_beta)?;
    let gate = g.sigmoid(gate_logit);
    let complement = g.affine(gate, -1.0, 1.0);
    let kept = g.mul_col(h, gate)?;
    let mixed = g.mul_col(context, complement)?;
    let hat = g.add(kept, mixed)?;

    Ok(A3mNodes { hat, attention, gate })
}

/// Gated aspect-aware states for `h` (L×h) given candidate rows.
pub fn a3m_attend(h: &Matrix, candidates: &[usize], params: &A3mParams) -> Result<A3mOutput, AedError> {
    let mut g = Graph::new();
    let hn = constant(&mut g, h);
    let p = params.map(|m| constant(&mut g, m));
    let nodes = a3m_graph(&mut g, hn, candidates, &p)?;
    Ok(A3mOutput {
        hat: g.value(nodes.hat).clone(),
        attention: g.value(nodes.attention).clone(),
        gate: g.value(nodes.gate).clone(),
    })
}
