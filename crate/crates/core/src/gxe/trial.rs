//! Longitudinal cohort tables and the emulated-trial analyses built on them.
//!
//! Table schema (tab-separated, `#` comment lines skipped, `NA` = missing):
//! `id`, `pheno_0`, `pheno_1`, `treated_0`, `treated_1`, then any numeric
//! covariate columns. Suffix 0 is the baseline visit, 1 the first revisit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::logistic::{iptw_weights, logistic_propensity, LogisticFit};
use super::ols::{ols, DesignMatrix, RegressionFit};
use super::ttest::{two_sample_ttest, TTest, TTestKind};
use super::quantile_groups;
use crate::error::{Error, Result};

pub const REQUIRED: [&str; 4] = ["pheno_0", "pheno_1", "treated_0", "treated_1"];
pub const LDL_THRESHOLDS: [f64; 4] = [1.81, 2.58, 3.36, 4.14];

#[derive(Clone, Debug, PartialEq)]
pub struct CohortTable {
    pub ids: Vec<String>,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
}

impl CohortTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn has(&self, name: &str) -> bool {
        self.columns.iter().any(|(n, _)| n == name)
    }

    pub fn raw(&self, name: &str) -> Result<&[Option<f64>]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Schema(format!("cohort table has no column {name}")))
    }

    /// Values of `name` at `rows`; a missing value is a schema error.
    pub fn values(&self, name: &str, rows: &[usize]) -> Result<Vec<f64>> {
        let col = self.raw(name)?;
        rows.iter()
            .map(|&i| {
                col[i].ok_or_else(|| {
                    Error::Schema(format!("missing {name} for subject {}", self.ids[i]))
                })
            })
            .collect()
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) -> Result<()> {
        let name = name.into();
        if values.len() != self.len() {
            return Err(Error::Validation(format!("column {name} has wrong length")));
        }
        if self.has(&name) {
            return Err(Error::Schema(format!("duplicate column {name}")));
        }
        self.columns.push((name, values));
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Schema("cohort table is empty".into()))?
            .split('\t')
            .collect();
        let id_col = header
            .iter()
            .position(|h| *h == "id")
            .ok_or_else(|| Error::Schema("cohort table needs an id column".into()))?;
        let names: Vec<usize> = (0..header.len()).filter(|&k| k != id_col).collect();
        let mut ids = Vec::new();
        let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
        for (r, line) in lines.enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != header.len() {
                return Err(Error::Format(format!(
                    "cohort row {} has {} fields, header has {}",
                    r + 1,
                    f.len(),
                    header.len()
                )));
            }
            ids.push(f[id_col].to_string());
            for (c, &k) in names.iter().enumerate() {
                let v = match f[k] {
                    "NA" | "" => None,
                    s => Some(s.parse::<f64>().map_err(|_| {
                        Error::Format(format!("cohort row {}: '{s}' in {} is not numeric", r + 1, header[k]))
                    })?),
                };
                cols[c].push(v);
            }
        }
        Ok(CohortTable {
            ids,
            columns: names.iter().map(|&k| header[k].to_string()).zip(cols).collect(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("id");
        for (n, _) in &self.columns {
            s.push('\t');
            s.push_str(n);
        }
        s.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            s.push_str(id);
            for (_, c) in &self.columns {
                match c[i] {
                    Some(v) => s.push_str(&format!("\t{v:?}")),
                    None => s.push_str("\tNA"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Rows retained for a longitudinal analysis, with the derived arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSet {
    pub rows: Vec<usize>,
    pub ids: Vec<String>,
    pub baseline: Vec<f64>,
    pub followup: Vec<f64>,
    pub delta: Vec<f64>,
    /// Treatment status at the revisit (the arm label).
    pub treated: Vec<bool>,
}

impl AnalysisSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|t| **t).count()
    }
}

fn require_schema(table: &CohortTable) -> Result<()> {
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|c| !table.has(c)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Schema(format!("cohort table lacks columns: {}", missing.join(", "))))
    }
}

fn select(table: &CohortTable, keep: impl Fn(f64, bool, bool) -> bool) -> Result<AnalysisSet> {
    require_schema(table)?;
    let (p0, p1) = (table.raw("pheno_0")?, table.raw("pheno_1")?);
    let (t0, t1) = (table.raw("treated_0")?, table.raw("treated_1")?);
    let mut set = AnalysisSet {
        rows: vec![],
        ids: vec![],
        baseline: vec![],
        followup: vec![],
        delta: vec![],
        treated: vec![],
    };
    for i in 0..table.len() {
        let (Some(a), Some(b), Some(s0), Some(s1)) = (p0[i], p1[i], t0[i], t1[i]) else {
            continue;
        };
        let (s0, s1) = (s0 != 0.0, s1 != 0.0);
        if keep(a, s0, s1) {
            set.rows.push(i);
            set.ids.push(table.ids[i].clone());
            set.baseline.push(a);
            set.followup.push(b);
            set.delta.push(b - a);
            set.treated.push(s1);
        }
    }
    Ok(set)
}

/// Parallel-group eligibility: baseline phenotype strictly above `threshold`,
/// complete data at both visits and, if requested, untreated at baseline.
pub fn eligibility_filter(table: &CohortTable, threshold: f64, exclude_baseline_treated: bool) -> Result<AnalysisSet> {
    select(table, |p0, s0, _| p0 > threshold && !(exclude_baseline_treated && s0))
}

/// Self-controlled selection: untreated at baseline, treated at the revisit,
/// complete data at both visits.
pub fn self_controlled_filter(table: &CohortTable) -> Result<AnalysisSet> {
    select(table, |_, s0, s1| !s0 && s1)
}

/// Compares the change from baseline between the high- and low-score groups
/// (`a` = high, `b` = low).
pub fn self_controlled_test(
    delta: &[f64],
    scores: &[f64],
    reference: &[f64],
    q_low: f64,
    q_high: f64,
    kind: TTestKind,
) -> Result<TTest> {
    let groups = quantile_groups(scores, reference, q_low, q_high)?;
    let mut high = Vec::new();
    let mut low = Vec::new();
    for (d, g) in delta.iter().zip(&groups) {
        match g {
            Some(true) => high.push(*d),
            Some(false) => low.push(*d),
            None => {}
        }
    }
    two_sample_ttest(&high, &low, kind)
}

pub const TREATED: &str = "treated";
pub const SUBGROUP: &str = "subgroup";
pub const SUBGROUP_X_TREATED: &str = "subgroup:treated";

fn base_design(treated: &[bool], covariates: &[(String, Vec<f64>)], weights: Option<&[f64]>) -> DesignMatrix {
    let n = treated.len();
    let mut d = DesignMatrix::with_intercept(n).column(TREATED, indicator(treated));
    for (name, v) in covariates {
        d.push(name.clone(), v.clone());
    }
    d.set_weights(weights.map(<[f64]>::to_vec));
    d
}

fn indicator(x: &[bool]) -> Vec<f64> {
    x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Weighted regression of the change score on treatment and baseline
/// covariates; the `treated` row is the treatment effect.
pub fn treatment_effect(
    delta_y: &[f64],
    treated: &[bool],
    covariates: &[(String, Vec<f64>)],
    weights: Option<&[f64]>,
) -> Result<RegressionFit> {
    if delta_y.is_empty() {
        return Err(Error::InsufficientData("empty analysis set".into()));
    }
    ols(&base_design(treated, covariates, weights), delta_y)
}

/// Treatment model plus subgroup and subgroup x treatment columns.
pub fn subgroup_interaction_test(
    delta_y: &[f64],
    treated: &[bool],
    subgroup: &[bool],
    covariates: &[(String, Vec<f64>)],
    weights: Option<&[f64]>,
) -> Result<RegressionFit> {
    if subgroup.len() != treated.len() {
        return Err(Error::Validation("subgroup and treatment lengths differ".into()));
    }
    let mut cells = [[0usize; 2]; 2];
    for (&s, &t) in subgroup.iter().zip(treated) {
        cells[s as usize][t as usize] += 1;
    }
    for (s, row) in cells.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c == 0 {
                return Err(Error::EmptyCell(format!(
                    "no subjects with subgroup={s} and treated={t}"
                )));
            }
        }
    }
    let mut d = base_design(treated, covariates, weights);
    let s = indicator(subgroup);
    let st: Vec<f64> = s.iter().zip(treated).map(|(a, &t)| if t { *a } else { 0.0 }).collect();
    d.push(SUBGROUP, s);
    d.push(SUBGROUP_X_TREATED, st);
    ols(&d, delta_y)
}

/// Forest-plot style summary of the treatment effect overall and per subgroup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub group: String,
    pub n: usize,
    pub n_treated: usize,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p: f64,
}

pub fn effect_row(group: &str, fit: &RegressionFit, n_treated: usize) -> Result<EffectRow> {
    let t = fit
        .term(TREATED)
        .ok_or_else(|| Error::Schema("fit has no treated term".into()))?;
    Ok(EffectRow {
        group: group.to_string(),
        n: fit.n,
        n_treated,
        estimate: t.estimate,
        ci_lo: t.ci_lo,
        ci_hi: t.ci_hi,
        p: t.p,
    })
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParallelGroupOptions {
    pub threshold: f64,
    pub exclude_baseline_treated: bool,
    /// Propensity model regressors besides the intercept.
    pub confounders: Vec<String>,
    /// Outcome model regressors besides intercept and treatment.
    pub outcome_covariates: Vec<String>,
    pub score_column: String,
    /// Quantile pairs defining high/low subgroups on the whole table.
    pub subgroups: Vec<(f64, f64)>,
    pub truncate: Option<(f64, f64)>,
}

impl Default for ParallelGroupOptions {
    fn default() -> Self {
        ParallelGroupOptions {
            threshold: 3.36,
            exclude_baseline_treated: true,
            confounders: vec!["pheno_0".into()],
            outcome_covariates: vec!["pheno_0".into()],
            score_column: "vPRS".into(),
            subgroups: vec![(0.25, 0.75), (0.1, 0.9)],
            truncate: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupResult {
    pub q_low: f64,
    pub q_high: f64,
    pub high: EffectRow,
    pub low: EffectRow,
    pub interaction: RegressionFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParallelGroupReport {
    pub set: AnalysisSet,
    /// `None` when weights were supplied by the caller.
    pub propensity: Option<LogisticFit>,
    pub weights: Vec<f64>,
    pub weighted: RegressionFit,
    pub unweighted: RegressionFit,
    pub overall: EffectRow,
    pub subgroups: Vec<SubgroupResult>,
}

fn covariate_block(table: &CohortTable, names: &[String], rows: &[usize]) -> Result<Vec<(String, Vec<f64>)>> {
    names
        .iter()
        .map(|n| Ok((n.clone(), table.values(n, rows)?)))
        .collect()
}

fn pick<T: Clone>(v: &[T], keep: &[usize]) -> Vec<T> {
    keep.iter().map(|&i| v[i].clone()).collect()
}

/// Eligibility, propensity model, IPTW-weighted treatment effect overall and
/// within high/low score subgroups, and the subgroup interaction tests.
pub fn parallel_group_analysis(table: &CohortTable, opts: &ParallelGroupOptions) -> Result<ParallelGroupReport> {
    parallel_group_analysis_with(table, opts, None)
}

/// As [`parallel_group_analysis`], but with per-subject weights keyed by id
/// in place of the fitted IPTW weights.
pub fn parallel_group_analysis_with(
    table: &CohortTable,
    opts: &ParallelGroupOptions,
    external_weights: Option<&BTreeMap<String, f64>>,
) -> Result<ParallelGroupReport> {
    let set = eligibility_filter(table, opts.threshold, opts.exclude_baseline_treated)?;
    if set.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no subjects pass eligibility at threshold {}",
            opts.threshold
        )));
    }
    let (propensity, weights) = match external_weights {
        Some(w) => {
            let picked = set
                .ids
                .iter()
                .map(|id| {
                    w.get(id)
                        .copied()
                        .ok_or_else(|| Error::Schema(format!("weights file has no entry for subject {id}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            (None, picked)
        }
        None => {
            let mut ps_design = DesignMatrix::with_intercept(set.len());
            for (name, v) in covariate_block(table, &opts.confounders, &set.rows)? {
                ps_design.push(name, v);
            }
            let fit = logistic_propensity(&ps_design, &set.treated)?;
            let w = iptw_weights(&fit.propensity, &set.treated, opts.truncate)?;
            (Some(fit), w)
        }
    };
    let covs = covariate_block(table, &opts.outcome_covariates, &set.rows)?;
    let weighted = treatment_effect(&set.delta, &set.treated, &covs, Some(&weights))?;
    let unweighted = treatment_effect(&set.delta, &set.treated, &covs, None)?;
    let overall = effect_row("overall", &weighted, set.n_treated())?;

    let reference: Vec<f64> = table
        .raw(&opts.score_column)?
        .iter()
        .filter_map(|v| *v)
        .collect();
    let scores = table.values(&opts.score_column, &set.rows)?;
    let mut subgroups = Vec::new();
    for &(q_low, q_high) in &opts.subgroups {
        let groups = quantile_groups(&scores, &reference, q_low, q_high)?;
        let member: Vec<usize> = (0..set.len()).filter(|&i| groups[i].is_some()).collect();
        let high_flag: Vec<bool> = member.iter().map(|&i| groups[i] == Some(true)).collect();
        let arm = |want: bool| -> Result<EffectRow> {
            let keep: Vec<usize> = member.iter().copied().filter(|&i| groups[i] == Some(want)).collect();
            let tr = pick(&set.treated, &keep);
            let cv: Vec<(String, Vec<f64>)> = covs.iter().map(|(n, v)| (n.clone(), pick(v, &keep))).collect();
            let fit = treatment_effect(&pick(&set.delta, &keep), &tr, &cv, Some(&pick(&weights, &keep)))?;
            let label = if want { format!("high>{q_high}") } else { format!("low<{q_low}") };
            effect_row(&label, &fit, tr.iter().filter(|t| **t).count())
        };
        // The interaction fit checks the 2x2 cells, so it runs before the arms.
        let cv: Vec<(String, Vec<f64>)> = covs.iter().map(|(n, v)| (n.clone(), pick(v, &member))).collect();
        let interaction = subgroup_interaction_test(
            &pick(&set.delta, &member),
            &pick(&set.treated, &member),
            &high_flag,
            &cv,
            Some(&pick(&weights, &member)),
        )?;
        let (high, low) = (arm(true)?, arm(false)?);
        subgroups.push(SubgroupResult {
            q_low,
            q_high,
            high,
            low,
            interaction,
        });
    }
    Ok(ParallelGroupReport {
        set,
        propensity,
        weights,
        weighted,
        unweighted,
        overall,
        subgroups,
    })
}
