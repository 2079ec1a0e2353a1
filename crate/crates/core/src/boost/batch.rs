use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::genotype::{CenteredTarget, GenotypeMatrix};
use crate::model::Parameter;
use crate::par::Execution;

/// Screened subset of variants for one distribution parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub parameter: Parameter,
    /// Ordered by decreasing |correlation|, ties by lower variant index.
    pub variant_indices: Vec<usize>,
    /// Correlations of `variant_indices` at build time.
    pub correlations: Vec<f64>,
    /// Highest |correlation| among variants left out (0 when none are).
    pub c_stop: f64,
    pub early_stop_flag: bool,
}

/// Orders by |c| descending, then variant index ascending.
fn screening_order(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0))
}

/// Screens all variants against `residual` and keeps the `p_batch` best.
pub fn build_batch(
    matrix: &GenotypeMatrix,
    residual: &[f64],
    p_batch: usize,
    parameter: Parameter,
    exec: Execution,
) -> Result<Batch> {
    matrix.check_target(residual)?;
    let target = CenteredTarget::new(residual)?;
    let corrs = matrix.all_correlations(&target, exec);
    Ok(batch_from_correlations(&corrs, p_batch, parameter))
}

pub fn batch_from_correlations(corrs: &[f64], p_batch: usize, parameter: Parameter) -> Batch {
    let mut order: Vec<(usize, f64)> = corrs.iter().copied().enumerate().collect();
    let keep = p_batch.min(order.len());
    if keep < order.len() {
        order.select_nth_unstable_by(keep, |&a, &b| screening_order(a, b));
    }
    let c_stop = if keep < order.len() {
        order[keep].1.abs()
    } else {
        0.0
    };
    order.truncate(keep);
    order.sort_by(|&a, &b| screening_order(a, b));
    Batch {
        parameter,
        variant_indices: order.iter().map(|&(j, _)| j).collect(),
        correlations: order.iter().map(|&(_, c)| c).collect(),
        c_stop,
        early_stop_flag: false,
    }
}

/// Position in `indices` of the highest |correlation|, ties to the lower
/// variant index.
pub fn best_in_batch(indices: &[usize], corrs: &[f64]) -> Option<usize> {
    (0..indices.len()).min_by(|&a, &b| screening_order((indices[a], corrs[a]), (indices[b], corrs[b])))
}
