//! Aspect-enhanced denoising: aspect-guided attention with a fusion gate,
//! affective-lexicon enhancement, the weighted association matrix and graph
//! convolution over it.
//!
//! Each stage is written once against the tape ([`Graph`]) so the model can
//! train through it; the plain `Matrix` entry points build a throwaway graph
//! of constants and read the values back.

mod a3m;
mod association;
mod gcn;
mod sentic;

pub use a3m::{a3m_attend, a3m_graph, A3mNodes, A3mOutput, A3mParams};
pub use association::{association_graph, association_mask, build_association_matrix, AssociationMask, AssociationMatrix};
pub use gcn::{gcn_forward, gcn_graph, GcnLayerParams};
pub use sentic::{sentic_enhance, sentic_graph, SenticParams};

use thiserror::Error;

use crate::numerics::{Graph, Matrix, NodeId, NumericsError};

/// Default dependency-distance threshold for text–text edges.
pub const DEFAULT_THRESHOLD: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AedError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn constant(g: &mut Graph, m: &Matrix) -> NodeId {
    g.constant(m.clone())
}
