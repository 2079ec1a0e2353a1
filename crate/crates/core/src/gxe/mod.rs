//! Gene-by-environment analyses on polygenic scores.
//!
//! Baseline interaction regressions, vPRS quintile profiles, the
//! self-controlled comparison of change scores and the inverse-probability
//! weighted parallel-group pipeline.

pub mod calibration;
mod logistic;
mod ols;
mod trial;
mod ttest;

use serde::{Deserialize, Serialize};

pub use logistic::{iptw_weights, logistic_propensity, LogisticFit, MAX_ITER, SCORE_TOL, SEPARATION_BOUND};
pub use ols::{ols, term_row, write_terms, DesignMatrix, RegressionFit, Term, INTERCEPT, TERM_HEADER};
pub use trial::{
    effect_row, eligibility_filter, parallel_group_analysis, parallel_group_analysis_with, self_controlled_filter, self_controlled_test, subgroup_interaction_test,
    treatment_effect, AnalysisSet, CohortTable, EffectRow, ParallelGroupOptions, ParallelGroupReport,
    SubgroupResult, LDL_THRESHOLDS, REQUIRED, SUBGROUP, SUBGROUP_X_TREATED,
    TREATED,
};
pub use ttest::{two_sample_ttest, TTest, TTestKind};

use crate::error::{Error, Result};
use crate::stats::{quantile_type7, sorted_copy};

pub const MPRS: &str = "mPRS";
pub const VPRS: &str = "vPRS";
pub const ENV: &str = "E";
pub const VPRS_X_ENV: &str = "vPRS:E";

/// Inputs of the baseline interaction model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GxeData {
    pub pheno: Vec<f64>,
    pub mprs: Vec<f64>,
    /// Standardized vPRS.
    pub vprs: Vec<f64>,
    /// Numeric exposure; ordinal exposures coded 0/1/2.
    pub env: Vec<f64>,
    pub covariates: Vec<(String, Vec<f64>)>,
}

impl GxeData {
    fn covariate(&self, name: &str) -> Result<&[f64]> {
        self.covariates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Schema(format!("robust mode needs a covariate named {name}")))
    }
}

/// Covariates interacted with vPRS in robust mode.
pub const ROBUST_COVARIATES: [&str; 2] = ["age", "sex"];

/// Fits `pheno ~ mPRS + vPRS + E + vPRS:E + covariates`; robust mode adds
/// `vPRS:age` and `vPRS:sex`. The `vPRS:E` row is the test of record.
pub fn gxe_interaction_test(data: &GxeData, robust: bool) -> Result<RegressionFit> {
    let n = data.pheno.len();
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
    let mut d = DesignMatrix::with_intercept(n)
        .column(MPRS, data.mprs.clone())
        .column(VPRS, data.vprs.clone())
        .column(ENV, data.env.clone())
        .column(VPRS_X_ENV, mul(&data.vprs, &data.env));
    for (name, v) in &data.covariates {
        d.push(name.clone(), v.clone());
    }
    if robust {
        for c in ROBUST_COVARIATES {
            d.push(format!("{VPRS}:{c}"), mul(&data.vprs, data.covariate(c)?));
        }
    }
    ols(&d, &data.pheno)
}

/// High (`Some(true)`) above the `q_high` quantile of `reference`, low
/// (`Some(false)`) below the `q_low` quantile, `None` in between.
pub fn quantile_groups(scores: &[f64], reference: &[f64], q_low: f64, q_high: f64) -> Result<Vec<Option<bool>>> {
    if !(0.0 < q_low && q_low < q_high && q_high < 1.0) {
        return Err(Error::Config(format!("quantiles ({q_low}, {q_high}) must satisfy 0 < low < high < 1")));
    }
    if reference.is_empty() {
        return Err(Error::InsufficientData("empty reference set".into()));
    }
    let sorted = sorted_copy(reference);
    let (lo, hi) = (quantile_type7(&sorted, q_low), quantile_type7(&sorted, q_high));
    Ok(scores
        .iter()
        .map(|&s| {
            if s > hi {
                Some(true)
            } else if s < lo {
                Some(false)
            } else {
                None
            }
        })
        .collect())
}

/// Type-7 cutpoints at 20/40/60/80 %.
pub fn quintile_cutpoints(reference: &[f64]) -> Result<[f64; 4]> {
    if reference.is_empty() {
        return Err(Error::InsufficientData("empty reference set".into()));
    }
    let sorted = sorted_copy(reference);
    Ok([0.2, 0.4, 0.6, 0.8].map(|q| quantile_type7(&sorted, q)))
}

/// Quintile index 0..5; values equal to a cutpoint fall in the lower group.
pub fn quintile_of(score: f64, cuts: &[f64; 4]) -> usize {
    cuts.iter().filter(|&&c| score > c).count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuintileEffect {
    /// 1..=5
    pub quintile: usize,
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p: f64,
}

pub const QUINTILE_HEADER: &str = "quintile\tn\testimate\tSE\tci_lo\tci_hi\tp";

impl QuintileEffect {
    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}",
            self.quintile, self.n, self.estimate, self.se, self.ci_lo, self.ci_hi, self.p
        )
    }
}

/// Below this many subjects a quintile fit is flagged in the log.
pub const MIN_QUINTILE_SIZE: usize = 50;

/// Effect of `env` on `pheno` within each vPRS quintile, adjusting for
/// `covariates`. Cutpoints come from the same `vprs` vector.
pub fn quintile_effects(
    pheno: &[f64],
    env: &[f64],
    vprs: &[f64],
    covariates: &[(String, Vec<f64>)],
) -> Result<Vec<QuintileEffect>> {
    let n = pheno.len();
    if env.len() != n || vprs.len() != n || covariates.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::Validation("quintile inputs differ in length".into()));
    }
    let cuts = quintile_cutpoints(vprs)?;
    let mut groups: [Vec<usize>; 5] = Default::default();
    for (i, &s) in vprs.iter().enumerate() {
        groups[quintile_of(s, &cuts)].push(i);
    }
    if let Some(k) = groups.iter().position(Vec::is_empty) {
        return Err(Error::EmptyCell(format!("vPRS quintile {} is empty", k + 1)));
    }
    groups
        .iter()
        .enumerate()
        .map(|(k, rows)| {
            if rows.len() < MIN_QUINTILE_SIZE {
                log::warn!("vPRS quintile {} has only {} subjects", k + 1, rows.len());
            }
            let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            let mut d = DesignMatrix::with_intercept(rows.len()).column(ENV, pick(env));
            for (name, c) in covariates {
                d.push(name.clone(), pick(c));
            }
            let fit = ols(&d, &pick(pheno))?;
            let t = fit.term(ENV).expect("env column present");
            Ok(QuintileEffect {
                quintile: k + 1,
                n: rows.len(),
                estimate: t.estimate,
                se: t.se,
                ci_lo: t.ci_lo,
                ci_hi: t.ci_hi,
                p: t.p,
            })
        })
        .collect()
}
