use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde_json::json;

use lssboost::gxe::calibration::{self, summarize, CalibrationSummary, TrialSpec};
use lssboost::gxe::{
    gxe_interaction_test, parallel_group_analysis_with, quintile_effects, self_controlled_filter,
    self_controlled_test, term_row, CohortTable, EffectRow, GxeData, ParallelGroupOptions, TTestKind, QUINTILE_HEADER,
    TERM_HEADER,
};
use lssboost::table::{column, parse_f64, read_table};
use lssboost::Execution;

use crate::common::{parse_pair, parse_pairs, Pairs, read_weights, usage, write_json, write_table, CliResult, Provenance};

#[derive(Subcommand, Debug)]
pub enum GxeCommand {
    /// Baseline vPRS x E interaction regression
    Test(TestArgs),
    /// Exposure effect within vPRS quintiles
    Quintiles(TestArgs),
    /// Change from baseline in high vs low vPRS groups among initiators
    SelfControlled(SelfControlledArgs),
    /// IPTW parallel-group treatment effects and subgroup interactions
    Iptw(IptwArgs),
}

#[derive(Args, Debug, Clone)]
pub struct TableArgs {
    /// Cohort table (tab-separated, `id` column, NA for missing)
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Scores TSV from `score`; joined on IID = id, adding mPRS and vPRS (standardized)
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Run the Monte-Carlo calibration suites with this many replicates
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub prefix: Option<String>,
}

impl TableArgs {
    fn prefix<'a>(&'a self, default: &'a str) -> &'a str {
        self.prefix.as_deref().unwrap_or(default)
    }

    fn load(&self) -> CliResult<Option<CohortTable>> {
        let Some(path) = &self.table else {
            return Ok(None);
        };
        let mut t = CohortTable::load(path)?;
        if let Some(sp) = &self.scores {
            let (h, rows) = read_table(sp)?;
            let iid = column(&h, "IID", sp)?;
            let (m, v) = (column(&h, "mPRS", sp)?, column(&h, "vPRS_std", sp)?);
            let mut by_id = std::collections::BTreeMap::new();
            for r in &rows {
                by_id.insert(r[iid].clone(), (parse_f64(&r[m], sp)?, parse_f64(&r[v], sp)?));
            }
            let get = |k: usize| -> Vec<Option<f64>> {
                t.ids.iter().map(|id| by_id.get(id).map(|p| if k == 0 { p.0 } else { p.1 })).collect()
            };
            let (mp, vp) = (get(0), get(1));
            t.push_column("mPRS", mp)?;
            t.push_column("vPRS", vp)?;
        }
        Ok(Some(t))
    }

    fn require(&self) -> CliResult<CohortTable> {
        match self.load()? {
            Some(t) => Ok(t),
            None => usage("--table is required unless --replicates is given"),
        }
    }

    fn inputs(&self) -> serde_json::Value {
        json!({ "table": self.table, "scores": self.scores })
    }
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, default_value = "pheno_0")]
    pub pheno_col: String,
    #[arg(long, default_value = "mPRS")]
    pub mprs_col: String,
    #[arg(long, default_value = "vPRS")]
    pub vprs_col: String,
    /// Exposure column; ordinal exposures coded 0/1/2
    #[arg(long, default_value = "E")]
    pub env_col: String,
    /// Adjustment covariates (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Also interact vPRS with age and sex
    #[arg(long)]
    pub robust: bool,
}

/// Rows with every listed column observed.
fn complete_rows(t: &CohortTable, cols: &[&str]) -> CliResult<Vec<usize>> {
    let raws = cols.iter().map(|c| t.raw(c)).collect::<lssboost::Result<Vec<_>>>()?;
    Ok((0..t.len()).filter(|&i| raws.iter().all(|r| r[i].is_some())).collect())
}

fn gxe_data(a: &TestArgs, t: &CohortTable) -> CliResult<GxeData> {
    let mut cols = vec![a.pheno_col.as_str(), &a.mprs_col, &a.vprs_col, &a.env_col];
    cols.extend(a.covariates.iter().map(String::as_str));
    let rows = complete_rows(t, &cols)?;
    Ok(GxeData {
        pheno: t.values(&a.pheno_col, &rows)?,
        mprs: t.values(&a.mprs_col, &rows)?,
        vprs: t.values(&a.vprs_col, &rows)?,
        env: t.values(&a.env_col, &rows)?,
        covariates: a
            .covariates
            .iter()
            .map(|c| Ok((c.clone(), t.values(c, &rows)?)))
            .collect::<CliResult<_>>()?,
    })
}

const CALIBRATION_HEADER: &str = "suite\treplicates\tmetric\tvalue";

fn summary_rows(s: &CalibrationSummary) -> Vec<String> {
    vec![
        format!("{}\t{}\trejection_rate_05\t{:?}", s.name, s.replicates, s.rejection_rate_05),
        format!("{}\t{}\tks_statistic\t{:?}", s.name, s.replicates, s.ks_statistic),
        format!("{}\t{}\tks_p\t{:?}", s.name, s.replicates, s.ks_p),
    ]
}

fn metric_row(suite: &str, reps: usize, metric: &str, value: f64) -> String {
    format!("{suite}\t{reps}\t{metric}\t{value:?}")
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn fraction(x: &[bool]) -> f64 {
    x.iter().filter(|b| **b).count() as f64 / x.len() as f64
}

/// Sample sizes and planted values of the calibration suites.
pub const NULL_GXE_N: usize = 1000;
pub const PLANTED_GXE_N: usize = 5000;
pub const PLANTED_INTERACTION: f64 = -0.088;
pub const QUINTILE_N: usize = 5000;
pub const QUINTILE_PLANTED: f64 = -1.0;
pub const TTEST_N: usize = 40;
pub const SUBGROUP_N: usize = 1200;
pub const SUBGROUP_EFFECTS: (f64, f64) = (-1.0, -0.3);

fn calibrate(which: &str, reps: usize, seed: u64) -> CliResult<Vec<String>> {
    if reps == 0 {
        return usage("--replicates must be at least 1");
    }
    let exec = Execution::default();
    let mut rows = Vec::new();
    match which {
        "test" => {
            let p = calibration::null_interaction_pvalues(reps, NULL_GXE_N, seed, exec)?;
            rows.extend(summary_rows(&summarize("gxe_interaction_null", &p)));
            let est = calibration::planted_interaction_estimates(reps, PLANTED_GXE_N, PLANTED_INTERACTION, seed, exec)?;
            rows.push(metric_row("gxe_interaction_planted", reps, "planted", PLANTED_INTERACTION));
            rows.push(metric_row("gxe_interaction_planted", reps, "mean_estimate", mean(&est)));
        }
        "quintiles" => {
            let null = calibration::quintile_profiles(reps, QUINTILE_N, 0.0, seed, exec)?;
            let ov: Vec<bool> = null.iter().map(|p| p.0).collect();
            rows.push(metric_row("quintiles_null", reps, "adjacent_overlap_fraction", fraction(&ov)));
            let planted = calibration::quintile_profiles(reps, QUINTILE_N, QUINTILE_PLANTED, seed, exec)?;
            let mono: Vec<bool> = planted.iter().map(|p| p.1).collect();
            rows.push(metric_row("quintiles_planted", reps, "monotone_fraction", fraction(&mono)));
        }
        "self-controlled" => {
            let p = calibration::null_ttest_pvalues(reps, TTEST_N, seed, exec)?;
            rows.extend(summary_rows(&summarize("welch_ttest_null", &p)));
        }
        _ => {
            let spec = TrialSpec::default();
            let est = calibration::iptw_estimates(reps, &spec, seed, exec)?;
            let w: Vec<f64> = est.iter().map(|e| e.0).collect();
            let u: Vec<f64> = est.iter().map(|e| e.1).collect();
            rows.push(metric_row("iptw_bias", reps, "true_effect", spec.effect_low));
            rows.push(metric_row("iptw_bias", reps, "mean_bias_weighted", mean(&w) - spec.effect_low));
            rows.push(metric_row("iptw_bias", reps, "mean_bias_unweighted", mean(&u) - spec.effect_low));
            let (ea, eb) = SUBGROUP_EFFECTS;
            let p = calibration::subgroup_pvalues(reps, SUBGROUP_N, ea, eb, seed, exec)?;
            rows.push(metric_row("subgroup_interaction_planted", reps, "power_05", calibration::rejection_rate(&p, 0.05)));
            let p0 = calibration::subgroup_pvalues(reps, SUBGROUP_N, ea, ea, seed, exec)?;
            rows.extend(summary_rows(&summarize("subgroup_interaction_null", &p0)));
        }
    }
    Ok(rows)
}

/// Writes the calibration table when `--replicates` was given. Returns
/// whether the table argument may be omitted.
fn maybe_calibrate(which: &str, t: &TableArgs, out: &Path, prov: &Provenance) -> CliResult<bool> {
    let Some(reps) = t.replicates else {
        return Ok(false);
    };
    let rows = calibrate(which, reps, t.seed)?;
    let path = out.join(format!("{}.calibration.tsv", t.prefix(which)));
    write_table(&path, prov, CALIBRATION_HEADER, &rows)?;
    Ok(true)
}

fn cmd_test(a: &TestArgs, out: &Path) -> CliResult<()> {
    let prov = Provenance::new("gxe test", &json!({
        "pheno_col": a.pheno_col, "mprs_col": a.mprs_col, "vprs_col": a.vprs_col,
        "env_col": a.env_col, "covariates": a.covariates, "robust": a.robust,
        "replicates": a.table.replicates, "seed": a.table.seed,
    }))?;
    let calibrated = maybe_calibrate("test", &a.table, out, &prov)?;
    if calibrated && a.table.table.is_none() {
        return prov.write_run_json(out, &format!("{}.run.json", a.table.prefix("gxe_test")), a.table.inputs());
    }
    let t = a.table.require()?;
    let fit = gxe_interaction_test(&gxe_data(a, &t)?, a.robust)?;
    let rows: Vec<String> = fit.terms.iter().map(term_row).collect();
    let prefix = a.table.prefix("gxe_test");
    write_table(&out.join(format!("{prefix}.tsv")), &prov, TERM_HEADER, &rows)?;
    prov.write_run_json(out, &format!("{prefix}.run.json"), a.table.inputs())
}

fn cmd_quintiles(a: &TestArgs, out: &Path) -> CliResult<()> {
    let prov = Provenance::new("gxe quintiles", &json!({
        "pheno_col": a.pheno_col, "vprs_col": a.vprs_col, "env_col": a.env_col,
        "covariates": a.covariates, "replicates": a.table.replicates, "seed": a.table.seed,
    }))?;
    let calibrated = maybe_calibrate("quintiles", &a.table, out, &prov)?;
    let prefix = a.table.prefix("quintiles");
    if calibrated && a.table.table.is_none() {
        return prov.write_run_json(out, &format!("{prefix}.run.json"), a.table.inputs());
    }
    let t = a.table.require()?;
    let mut cols = vec![a.pheno_col.as_str(), &a.vprs_col, &a.env_col];
    cols.extend(a.covariates.iter().map(String::as_str));
    let r = complete_rows(&t, &cols)?;
    let covs = a
        .covariates
        .iter()
        .map(|c| Ok((c.clone(), t.values(c, &r)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let q = quintile_effects(&t.values(&a.pheno_col, &r)?, &t.values(&a.env_col, &r)?, &t.values(&a.vprs_col, &r)?, &covs)?;
    let rows: Vec<String> = q.iter().map(|e| e.tsv_row()).collect();
    write_table(&out.join(format!("{prefix}.tsv")), &prov, QUINTILE_HEADER, &rows)?;
    prov.write_run_json(out, &format!("{prefix}.run.json"), a.table.inputs())
}

#[derive(Args, Debug)]
pub struct SelfControlledArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, default_value = "vPRS")]
    pub vprs_col: String,
    /// Quantile pairs low:high defining the low and high groups
    #[arg(long, default_value = "0.25:0.75,0.1:0.9", value_parser = parse_pairs)]
    pub quantiles: Pairs,
    /// Pooled-variance t-test instead of Welch
    #[arg(long)]
    pub pooled: bool,
}

const SC_HEADER: &str = "q_low\tq_high\ttest\tn_high\tn_low\tmean_high\tmean_low\tt\tdf\tp";

fn cmd_self_controlled(a: &SelfControlledArgs, out: &Path) -> CliResult<()> {
    let kind = if a.pooled { TTestKind::Pooled } else { TTestKind::Welch };
    let prov = Provenance::new("gxe self-controlled", &json!({
        "vprs_col": a.vprs_col, "quantiles": a.quantiles, "test": kind,
        "replicates": a.table.replicates, "seed": a.table.seed,
    }))?;
    let calibrated = maybe_calibrate("self-controlled", &a.table, out, &prov)?;
    let prefix = a.table.prefix("self_controlled");
    if calibrated && a.table.table.is_none() {
        return prov.write_run_json(out, &format!("{prefix}.run.json"), a.table.inputs());
    }
    let t = a.table.require()?;
    let set = self_controlled_filter(&t)?;
    let reference: Vec<f64> = t.raw(&a.vprs_col)?.iter().filter_map(|v| *v).collect();
    let scores = t.values(&a.vprs_col, &set.rows)?;
    let mut rows = Vec::new();
    for &(lo, hi) in &a.quantiles.0 {
        let r = self_controlled_test(&set.delta, &scores, &reference, lo, hi, kind)?;
        let name = serde_json::to_value(kind).map_err(lssboost::Error::from)?;
        rows.push(format!(
            "{lo}\t{hi}\t{}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}",
            name.as_str().unwrap_or("welch"),
            r.n_a,
            r.n_b,
            r.mean_a,
            r.mean_b,
            r.t,
            r.df,
            r.p
        ));
    }
    write_table(&out.join(format!("{prefix}.tsv")), &prov, SC_HEADER, &rows)?;
    prov.write_run_json(out, &format!("{prefix}.run.json"), a.table.inputs())
}

#[derive(Args, Debug)]
pub struct IptwArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Eligibility: baseline phenotype strictly above this value
    #[arg(long, default_value_t = 3.36)]
    pub threshold: f64,
    /// Keep subjects already treated at baseline
    #[arg(long)]
    pub include_baseline_treated: bool,
    /// Propensity model regressors (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "pheno_0")]
    pub confounders: Vec<String>,
    /// Outcome model covariates (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "pheno_0")]
    pub outcome_covariates: Vec<String>,
    #[arg(long, default_value = "vPRS")]
    pub score_col: String,
    /// Quantile pairs low:high for the subgroup analyses
    #[arg(long, default_value = "0.25:0.75,0.1:0.9", value_parser = parse_pairs)]
    pub subgroups: Pairs,
    /// Clamp weights to these percentiles, e.g. 0.01:0.99
    #[arg(long, value_parser = parse_pair)]
    pub truncate: Option<(f64, f64)>,
    /// Per-subject weights (columns id, weight) used instead of fitted IPTW weights
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

const EFFECT_HEADER: &str = "group\tweighting\tn\tn_treated\testimate\tci_lo\tci_hi\tp";

fn effect_line(r: &EffectRow, weighting: &str) -> String {
    format!(
        "{}\t{weighting}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}",
        r.group, r.n, r.n_treated, r.estimate, r.ci_lo, r.ci_hi, r.p
    )
}

fn cmd_iptw(a: &IptwArgs, out: &Path) -> CliResult<()> {
    let opts = ParallelGroupOptions {
        threshold: a.threshold,
        exclude_baseline_treated: !a.include_baseline_treated,
        confounders: a.confounders.clone(),
        outcome_covariates: a.outcome_covariates.clone(),
        score_column: a.score_col.clone(),
        subgroups: a.subgroups.0.clone(),
        truncate: a.truncate,
    };
    let prov = Provenance::new("gxe iptw", &json!({
        "options": opts, "weights": a.weights.is_some(),
        "replicates": a.table.replicates, "seed": a.table.seed,
    }))?;
    let calibrated = maybe_calibrate("iptw", &a.table, out, &prov)?;
    let prefix = a.table.prefix("iptw");
    let mut inputs = a.table.inputs();
    inputs["weights"] = json!(a.weights);
    if calibrated && a.table.table.is_none() {
        return prov.write_run_json(out, &format!("{prefix}.run.json"), inputs);
    }
    let t = a.table.require()?;
    let external = a.weights.as_deref().map(read_weights).transpose()?;
    let rep = parallel_group_analysis_with(&t, &opts, external.as_ref())?;

    let mut effects = vec![
        effect_line(&rep.overall, "iptw"),
        effect_line(&lssboost::gxe::effect_row("overall", &rep.unweighted, rep.set.n_treated())?, "none"),
    ];
    let mut inter = Vec::new();
    for s in &rep.subgroups {
        effects.push(effect_line(&s.high, "iptw"));
        effects.push(effect_line(&s.low, "iptw"));
        for term in &s.interaction.terms {
            inter.push(format!("{}\t{}\t{}", s.q_low, s.q_high, term_row(term)));
        }
    }
    write_table(&out.join(format!("{prefix}_effects.tsv")), &prov, EFFECT_HEADER, &effects)?;
    write_table(
        &out.join(format!("{prefix}_interaction.tsv")),
        &prov,
        &format!("q_low\tq_high\t{TERM_HEADER}"),
        &inter,
    )?;
    let weight_rows: Vec<String> = (0..rep.set.len())
        .map(|i| {
            let ps = rep
                .propensity
                .as_ref()
                .map_or("NA".to_string(), |f| format!("{:?}", f.propensity[i]));
            format!("{}\t{}\t{ps}\t{:?}", rep.set.ids[i], rep.set.treated[i] as u8, rep.weights[i])
        })
        .collect();
    write_table(&out.join(format!("{prefix}_weights.tsv")), &prov, "id\ttreated\tpropensity\tweight", &weight_rows)?;
    write_json(&out.join(format!("{prefix}.json")), &rep)?;
    prov.write_run_json(out, &format!("{prefix}.run.json"), inputs)
}

pub fn cmd_gxe(c: &GxeCommand, out: &Path) -> CliResult<()> {
    match c {
        GxeCommand::Test(a) => cmd_test(a, out),
        GxeCommand::Quintiles(a) => cmd_quintiles(a, out),
        GxeCommand::SelfControlled(a) => cmd_self_controlled(a, out),
        GxeCommand::Iptw(a) => cmd_iptw(a, out),
    }
}
