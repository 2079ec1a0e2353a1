use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ols::DesignMatrix;
use crate::error::{Error, Result};
use crate::stats;

pub const SCORE_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 50;
/// Coefficient magnitude taken as evidence of separation.
pub const SEPARATION_BOUND: f64 = 15.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub propensity: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares. Design weights, if any, are ignored.
pub fn logistic_propensity(design: &DesignMatrix, treated: &[bool]) -> Result<LogisticFit> {
    let n = design.n_rows();
    let q = design.n_cols();
    if treated.len() != n {
        return Err(Error::Validation(format!("{} labels for {n} rows", treated.len())));
    }
    let n1 = treated.iter().filter(|t| **t).count();
    if n1 == 0 || n1 == n {
        return Err(Error::Separation("only one treatment class present".into()));
    }
    if q == 0 || n <= q {
        return Err(Error::InsufficientData(format!("{n} rows for {q} coefficients")));
    }
    let x = DMatrix::from_fn(n, q, |i, k| design.columns()[k][i]);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite design value".into()));
    }
    let y = DVector::from_fn(n, |i, _| if treated[i] { 1.0 } else { 0.0 });
    let mut beta = DVector::zeros(q);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let eta = &x * &beta;
        let p = eta.map(sigmoid);
        let score = x.transpose() * (&y - &p);
        if score.amax() < SCORE_TOL {
            converged = true;
            break;
        }
        if iterations == MAX_ITER {
            break;
        }
        let w = p.map(|v| v * (1.0 - v));
        let mut info = DMatrix::zeros(q, q);
        for i in 0..n {
            let row = x.row(i);
            info += w[i] * row.transpose() * row;
        }
        let step = info
            .cholesky()
            .ok_or_else(|| Error::Separation("information matrix not positive definite".into()))?
            .solve(&score);
        beta += step;
        iterations += 1;
        if beta.iter().any(|b| !b.is_finite() || b.abs() > SEPARATION_BOUND) {
            return Err(Error::Separation(format!(
                "coefficient magnitude exceeded {SEPARATION_BOUND} after {iterations} iterations"
            )));
        }
    }
    let propensity: Vec<f64> = (&x * &beta).iter().map(|e| sigmoid(*e)).collect();
    if propensity.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::Separation("fitted propensity reached 0 or 1".into()));
    }
    Ok(LogisticFit {
        names: design.names().to_vec(),
        coefficients: beta.iter().copied().collect(),
        propensity,
        iterations,
        converged,
    })
}

/// 1/ps for treated, 1/(1-ps) for controls, optionally truncated at the
/// given lower and upper percentiles (in [0, 1]) of the weights.
pub fn iptw_weights(propensity: &[f64], treated: &[bool], truncate: Option<(f64, f64)>) -> Result<Vec<f64>> {
    if propensity.len() != treated.len() {
        return Err(Error::Validation("propensity and treatment lengths differ".into()));
    }
    let mut w = Vec::with_capacity(propensity.len());
    for (&ps, &t) in propensity.iter().zip(treated) {
        if !(ps > 0.0 && ps < 1.0) {
            return Err(Error::Validation(format!("propensity {ps} outside (0, 1)")));
        }
        w.push(if t { 1.0 / ps } else { 1.0 / (1.0 - ps) });
    }
    if let Some((lo, hi)) = truncate {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("truncation percentiles ({lo}, {hi}) invalid")));
        }
        let sorted = stats::sorted_copy(&w);
        let (a, b) = (stats::quantile_type7(&sorted, lo), stats::quantile_type7(&sorted, hi));
        for v in &mut w {
            *v = v.clamp(a, b);
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only() {
        let d = DesignMatrix::with_intercept(4);
        let f = logistic_propensity(&d, &[true, false, true, false]).unwrap();
        assert!(f.coefficients[0].abs() < 1e-12);
        assert!(f.propensity.iter().all(|p| (p - 0.5).abs() < 1e-12));
        let f = logistic_propensity(&d, &[true, true, true, false]).unwrap();
        assert!((f.coefficients[0] - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn separation_detected() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let t: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let d = DesignMatrix::with_intercept(20).column("x", x);
        assert!(matches!(logistic_propensity(&d, &t), Err(Error::Separation(_))));
        assert!(matches!(
            logistic_propensity(&DesignMatrix::with_intercept(3), &[true; 3]),
            Err(Error::Separation(_))
        ));
    }

    #[test]
    fn weight_formula() {
        assert_eq!(iptw_weights(&[0.25], &[true], None).unwrap(), vec![4.0]);
        assert!((iptw_weights(&[0.25], &[false], None).unwrap()[0] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(iptw_weights(&[0.5; 3], &[true, false, true], None).unwrap(), vec![2.0; 3]);
        assert!(iptw_weights(&[1.0], &[true], None).is_err());
        assert!(iptw_weights(&[0.0], &[false], None).is_err());
    }

    #[test]
    fn truncation_clamps_extremes() {
        let ps = [0.01, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.99];
        let t = [true, true, false, true, false, true, false, true, false, false];
        let w = iptw_weights(&ps, &t, Some((0.0, 0.9))).unwrap();
        assert!(w[0] < 100.0 && w[9] < 100.0);
        assert!(w.iter().all(|v| *v >= 1.0));
    }
}
