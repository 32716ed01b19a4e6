//! Central finite-difference verification of tape gradients.

use super::graph::{Graph, NodeId};
use super::matrix::Matrix;
use super::NumericsError;

/// Floor applied to the denominator of the relative error.
pub const REL_ERR_FLOOR: f64 = 1e-8;

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Worst coordinate seen by [`finite_diff_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Largest relative error per parameter tensor, in input order.
    pub per_param: Vec<f64>,
    /// (analytic, numeric) at the worst coordinate of each parameter.
    pub per_param_worst: Vec<(f64, f64)>,
    /// (tensor, flat index) of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Compares backward adjoints of a scalar function against central
/// differences `(f(x+h) − f(x−h)) / 2h` for every coordinate of every
/// parameter.
///
/// `f` receives a fresh graph and one parameter node per entry of `params`
/// and must return a 1×1 node.
pub fn finite_diff_check<F>(f: F, params: &[Matrix], step: f64) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId, NumericsError>,
{
    if !(step > 0.0) {
        return Err(NumericsError::Contract(format!("step must be positive, got {step}")));
    }
    let eval = |values: &[Matrix]| -> Result<f64, NumericsError> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = values.iter().map(|m| g.param(m.clone())).collect();
        let root = f(&mut g, &ids)?;
        Ok(g.value(root).item())
    };

    let mut g = Graph::new();
    let ids: Vec<NodeId> = params.iter().map(|m| g.param(m.clone())).collect();
    let root = f(&mut g, &ids)?;
    g.backward(root)?;
    let analytic: Vec<Matrix> = ids.iter().map(|&id| g.grad_or_zeros(id)).collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        per_param: vec![0.0; params.len()],
        per_param_worst: vec![(0.0, 0.0); params.len()],
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    let mut work: Vec<Matrix> = params.to_vec();
    for p in 0..params.len() {
        for k in 0..params[p].len() {
            let original = work[p].data()[k];
            work[p].data_mut()[k] = original + step;
            let plus = eval(&work)?;
            work[p].data_mut()[k] = original - step;
            let minus = eval(&work)?;
            work[p].data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[p].data()[k];
            let err = relative_error(a, numeric);
            if err > report.per_param[p] {
                report.per_param[p] = err;
                report.per_param_worst[p] = (a, numeric);
            }
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((p, k));
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}
