//! Additive affective-lexicon enhancement of text states.

use serde::{Deserialize, Serialize};

use super::{constant, AedError};
use crate::numerics::{Graph, Matrix, NodeId};

/// `w_s` and `b_s` are both 1×h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenticParams<T = Matrix> {
    pub w_s: T,
    pub b_s: T,
}

impl<T> SenticParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> SenticParams<U> {
        SenticParams {
            w_s: f(&self.w_s),
            b_s: f(&self.b_s),
        }
    }

    pub fn fields(&self) -> [(&'static str, &T); 2] {
        [("w_s", &self.w_s), ("b_s", &self.b_s)]
    }
}

impl SenticParams<Matrix> {
    pub fn zeros(h: usize) -> Self {
        Self {
            w_s: Matrix::zeros(1, h),
            b_s: Matrix::zeros(1, h),
        }
    }
}

/// `H^S = Ĥ + s·w_s + mask·b_s`, where `s` is the per-row lexicon value
/// (0 on image rows) and `mask` is 1 on text rows.
pub fn sentic_graph(
    g: &mut Graph,
    h_hat: NodeId,
    sentic: &[f64],
    m: usize,
    p: &SenticParams<NodeId>,
) -> Result<NodeId, AedError> {
    let rows = g.value(h_hat).rows();
    if m + sentic.len() != rows {
        return Err(AedError::Contract(format!(
            "{} lexicon values with {m} image rows for {rows} states",
            sentic.len()
        )));
    }
    let mut values = vec![0.0; m];
    values.extend_from_slice(sentic);
    let mut mask = vec![0.0; m];
    mask.resize(rows, 1.0);
    let s = g.constant(Matrix::col_vector(&values));
    let mask = g.constant(Matrix::col_vector(&mask));
    let scaled = g.matmul(s, p.w_s)?;
    let shift = g.matmul(mask, p.b_s)?;
    let out = g.add(h_hat, scaled)?;
    Ok(g.add(out, shift)?)
}

/// Enhances the text rows `m..` of `h_hat`; image rows pass through.
pub fn sentic_enhance(h_hat: &Matrix, sentic: &[f64], m: usize, params: &SenticParams) -> Result<Matrix, AedError> {
    let mut g = Graph::new();
    let h = constant(&mut g, h_hat);
    let p = params.map(|x| constant(&mut g, x));
    let out = sentic_graph(&mut g, h, sentic, m, &p)?;
    Ok(g.value(out).clone())
}
