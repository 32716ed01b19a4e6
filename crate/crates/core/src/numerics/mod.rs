//! Dense matrices, a reverse-mode tape over them, and finite-difference
//! gradient verification.

mod gradcheck;
mod graph;
mod matrix;

pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport, REL_ERR_FLOOR};
pub use graph::{ComputationNode, Graph, NodeId, Op};
pub use matrix::{activation, cosine, dot, l2_norm, matmul, sigmoid, softmax_rows, Activation, Matrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch in {op}: {}×{} vs {}×{}", lhs.0, lhs.1, rhs.0, rhs.1)]
    Dimension {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("index {index} out of range {len} in {op}")]
    Index {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("contract violation: {0}")]
    Contract(String),
}
