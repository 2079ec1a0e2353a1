use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{t_critical, t_two_sided_p};

pub const INTERCEPT: &str = "(intercept)";

/// Regressors by column plus optional row weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl DesignMatrix {
    /// Empty design for `n` rows.
    pub fn new(n: usize) -> Self {
        DesignMatrix {
            n,
            names: Vec::new(),
            columns: Vec::new(),
            weights: None,
        }
    }

    /// Design with an intercept column.
    pub fn with_intercept(n: usize) -> Self {
        Self::new(n).column(INTERCEPT, vec![1.0; n])
    }

    pub fn column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.push(name, values);
        self
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.names.push(name.into());
        self.columns.push(values);
    }

    pub fn weights(mut self, w: Vec<f64>) -> Self {
        self.weights = Some(w);
        self
    }

    pub fn set_weights(&mut self, w: Option<Vec<f64>>) {
        self.weights = w;
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn weights_ref(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    fn validate(&self) -> Result<()> {
        for (name, c) in self.names.iter().zip(&self.columns) {
            if c.len() != self.n {
                return Err(Error::Validation(format!(
                    "column {name} has {} rows, expected {}",
                    c.len(),
                    self.n
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("column {name} has non-finite values")));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n {
                return Err(Error::Validation(format!("{} weights for {} rows", w.len(), self.n)));
            }
            if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Validation("weights must be positive and finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub terms: Vec<Term>,
    pub df: usize,
    pub n: usize,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub sigma2: f64,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.term == name)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.estimate).collect()
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        write_terms(&self.terms, path, comment)
    }
}

pub const TERM_HEADER: &str = "term\testimate\tSE\tt\tp\tci_lo\tci_hi";

pub fn term_row(t: &Term) -> String {
    format!(
        "{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}",
        t.term, t.estimate, t.se, t.t, t.p, t.ci_lo, t.ci_hi
    )
}

pub fn write_terms(terms: &[Term], path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if let Some(c) = comment {
        writeln!(w, "# {c}").map_err(io)?;
    }
    writeln!(w, "{TERM_HEADER}").map_err(io)?;
    for t in terms {
        writeln!(w, "{}", term_row(t)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Relative residual norm below which a column counts as a linear
/// combination of the columns before it.
const RANK_TOL: f64 = 1e-9;

/// Names of columns that are linear combinations of earlier columns.
fn dependent_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let col = x.column(k).into_owned();
        let norm0 = col.norm();
        let mut v = col;
        // Two passes of modified Gram-Schmidt for stability.
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= RANK_TOL * norm0 {
            dependent.push(name.clone());
        } else {
            basis.push(v / norm);
        }
    }
    dependent
}

/// Weighted least squares with classical inference.
pub fn ols(design: &DesignMatrix, y: &[f64]) -> Result<RegressionFit> {
    design.validate()?;
    let n = design.n;
    let q = design.n_cols();
    if y.len() != n {
        return Err(Error::Validation(format!("{} responses for {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite response".into()));
    }
    if q == 0 {
        return Err(Error::Config("design has no columns".into()));
    }
    if n <= q {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot support {q} coefficients with residual degrees of freedom"
        )));
    }
    let sw: Vec<f64> = match &design.weights {
        Some(w) => w.iter().map(|v| v.sqrt()).collect(),
        None => vec![1.0; n],
    };
    let x = DMatrix::from_fn(n, q, |i, k| design.columns[k][i] * sw[i]);
    let dependent = dependent_columns(&x, &design.names);
    if !dependent.is_empty() {
        return Err(Error::Collinear(dependent));
    }
    let yt = DVector::from_fn(n, |i, _| y[i] * sw[i]);
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &yt;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numeric("singular triangular factor".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(q, q))
        .ok_or_else(|| Error::Numeric("singular triangular factor".into()))?;
    let cov_unscaled = &r_inv * r_inv.transpose();

    let fitted: Vec<f64> = (0..n)
        .map(|i| (0..q).map(|k| design.columns[k][i] * beta[k]).sum())
        .collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals
        .iter()
        .zip(&sw)
        .map(|(e, s)| (e * s) * (e * s))
        .sum();
    let df = n - q;
    let sigma2 = rss / df as f64;
    let tcrit = t_critical(0.05, df as f64)?;
    let mut terms = Vec::with_capacity(q);
    for k in 0..q {
        let est = beta[k];
        let se = (sigma2 * cov_unscaled[(k, k)]).max(0.0).sqrt();
        let (t, p) = if se > 0.0 {
            let t = est / se;
            (t, t_two_sided_p(t, df as f64)?)
        } else if est == 0.0 {
            (0.0, 1.0)
        } else {
            (est.signum() * f64::INFINITY, 0.0)
        };
        terms.push(Term {
            term: design.names[k].clone(),
            estimate: est,
            se,
            t,
            p,
            ci_lo: est - tcrit * se,
            ci_hi: est + tcrit * se,
        });
    }
    Ok(RegressionFit {
        terms,
        df,
        n,
        rss,
        sigma2,
        fitted,
        residuals,
    })
}
