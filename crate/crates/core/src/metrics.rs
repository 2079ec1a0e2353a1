//! Evaluation of a fitted model against a simulated truth.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{nll_loss, predict, LssModel, Parameter};
use crate::sim::{SimulatedCohort, SplitLabel};
use crate::stats::pearson;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub r2: f64,
    pub test_nll: f64,
    pub n_selected_mu: usize,
    pub n_selected_sigma: usize,
    pub n_shared: usize,
    pub tpr_mu: f64,
    pub tnr_mu: f64,
    pub tpr_sigma: f64,
    pub tnr_sigma: f64,
    /// corr(sigma_true, sigma_hat) on the sigma scale.
    pub sigma_corr: f64,
    /// Same on the log scale, for diagnostics.
    pub eta_corr: f64,
    pub pct_selected_mu_of_p: f64,
    pub pct_selected_sigma_of_p: f64,
    pub pct_selected_mu_of_truth: f64,
    pub pct_selected_sigma_of_truth: f64,
    pub m_stop: usize,
    pub fit_seconds: f64,
}

pub const REPORT_COLUMNS: [&str; 17] = [
    "r2",
    "test_nll",
    "n_selected_mu",
    "n_selected_sigma",
    "n_shared",
    "tpr_mu",
    "tnr_mu",
    "tpr_sigma",
    "tnr_sigma",
    "sigma_corr",
    "eta_corr",
    "pct_selected_mu_of_p",
    "pct_selected_sigma_of_p",
    "pct_selected_mu_of_truth",
    "pct_selected_sigma_of_truth",
    "m_stop",
    "fit_seconds",
];

impl EvalReport {
    pub fn tsv_header() -> String {
        REPORT_COLUMNS.join("\t")
    }

    pub fn tsv_row(&self) -> String {
        format!(
            "{:?}\t{:?}\t{}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{}\t{:?}",
            self.r2,
            self.test_nll,
            self.n_selected_mu,
            self.n_selected_sigma,
            self.n_shared,
            self.tpr_mu,
            self.tnr_mu,
            self.tpr_sigma,
            self.tnr_sigma,
            self.sigma_corr,
            self.eta_corr,
            self.pct_selected_mu_of_p,
            self.pct_selected_sigma_of_p,
            self.pct_selected_mu_of_truth,
            self.pct_selected_sigma_of_truth,
            self.m_stop,
            self.fit_seconds,
        )
    }
}

/// Squared Pearson correlation.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    correlation(y_true, y_pred).map(|r| r * r)
}

fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!("lengths {} and {} differ", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least 2 values".into()));
    }
    pearson(a, b).ok_or_else(|| Error::Degenerate("constant vector in correlation".into()))
}

/// (true positive rate, true negative rate) of `selected` against `truth`
/// within a universe of `p` variants.
pub fn selection_rates(selected: &BTreeSet<String>, truth: &BTreeSet<String>, p: usize) -> Result<(f64, f64)> {
    if truth.is_empty() {
        return Err(Error::Degenerate("true positive rate undefined for an empty truth set".into()));
    }
    if truth.len() > p || selected.len() > p {
        return Err(Error::Validation(format!("sets larger than the universe of {p}")));
    }
    let tp = selected.intersection(truth).count();
    let fp = selected.len() - tp;
    let negatives = p - truth.len();
    let tnr = if negatives == 0 {
        1.0
    } else {
        (negatives - fp) as f64 / negatives as f64
    };
    Ok((tp as f64 / truth.len() as f64, tnr))
}

pub fn sigma_correlation(sigma_true: &[f64], sigma_hat: &[f64]) -> Result<f64> {
    correlation(sigma_true, sigma_hat)
}

/// Scores `model` on the test part of `cohort`.
pub fn evaluate(model: &LssModel, cohort: &SimulatedCohort, fit_seconds: f64) -> Result<EvalReport> {
    let rows = cohort.indices(SplitLabel::Test);
    let g = cohort.matrix.subset_samples(&rows)?;
    let y: Vec<f64> = rows.iter().map(|&i| cohort.baseline_y[i]).collect();
    let sigma_true: Vec<f64> = rows.iter().map(|&i| cohort.sigma_true[i]).collect();
    let pred = predict(model, &g, None)?;
    let p = cohort.matrix.n_variants();

    let sel_mu = model.selected(Parameter::Mu);
    let sel_sigma = model.selected(Parameter::Sigma);
    let truth_mu: BTreeSet<String> = cohort.true_beta.keys().cloned().collect();
    let truth_sigma: BTreeSet<String> = cohort.true_gamma.keys().cloned().collect();
    let (tpr_mu, tnr_mu) = selection_rates(&sel_mu, &truth_mu, p)?;
    let (tpr_sigma, tnr_sigma) = selection_rates(&sel_sigma, &truth_sigma, p)?;
    let eta_true: Vec<f64> = sigma_true.iter().map(|s| s.ln()).collect();
    // An intercept-only sigma model has no spread to correlate.
    let sigma_corr = sigma_correlation(&sigma_true, &pred.sigma).unwrap_or(0.0);
    let eta_corr = correlation(&eta_true, &pred.eta_sigma).unwrap_or(0.0);
    let pct = |a: usize, b: usize| 100.0 * a as f64 / b as f64;
    Ok(EvalReport {
        r2: r_squared(&y, &pred.mu).unwrap_or(0.0),
        test_nll: nll_loss(&y, &pred)?,
        n_selected_mu: sel_mu.len(),
        n_selected_sigma: sel_sigma.len(),
        n_shared: sel_mu.intersection(&sel_sigma).count(),
        tpr_mu,
        tnr_mu,
        tpr_sigma,
        tnr_sigma,
        sigma_corr,
        eta_corr,
        pct_selected_mu_of_p: pct(sel_mu.len(), p),
        pct_selected_sigma_of_p: pct(sel_sigma.len(), p),
        pct_selected_mu_of_truth: pct(sel_mu.len(), truth_mu.len()),
        pct_selected_sigma_of_truth: pct(sel_sigma.len(), truth_sigma.len()),
        m_stop: model.m_stop,
        fit_seconds,
    })
}
