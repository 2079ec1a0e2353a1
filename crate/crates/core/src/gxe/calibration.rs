//! Monte-Carlo generators and replicate runners for the GxE battery.
//!
//! Replicate `r` of a run seeded with `seed` draws from its own ChaCha stream,
//! so results do not depend on how replicates are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::trial::{parallel_group_analysis, CohortTable, ParallelGroupOptions};
use super::{
    gxe_interaction_test, quintile_effects, subgroup_interaction_test, two_sample_ttest, GxeData, TTestKind,
    SUBGROUP_X_TREATED, TREATED, VPRS_X_ENV,
};
use crate::error::Result;
use crate::par::{map_indices, Execution};
use crate::stats;

fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64 + 1);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn run<T: Send>(exec: Execution, replicates: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    map_indices(exec, replicates, f).into_iter().collect()
}

/// Baseline cohort with a binary exposure and a planted vPRS x E effect.
pub fn simulate_gxe(n: usize, interaction: f64, rng: &mut ChaCha8Rng) -> GxeData {
    let mut d = GxeData::default();
    let mut age = Vec::with_capacity(n);
    let mut sex = Vec::with_capacity(n);
    for _ in 0..n {
        let m = normal(rng);
        let v = normal(rng);
        let e = if rng.random_bool(0.3) { 1.0 } else { 0.0 };
        let a = 57.0 + 8.0 * normal(rng);
        let s = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let y = 3.5 + 0.5 * m + 0.05 * v - 1.0 * e + interaction * v * e + 0.01 * (a - 57.0) - 0.1 * s + normal(rng);
        d.pheno.push(y);
        d.mprs.push(m);
        d.vprs.push(v);
        d.env.push(e);
        age.push(a);
        sex.push(s);
    }
    d.covariates = vec![("age".into(), age), ("sex".into(), sex)];
    d
}

/// vPRS x E p-values under no interaction.
pub fn null_interaction_pvalues(replicates: usize, n: usize, seed: u64, exec: Execution) -> Result<Vec<f64>> {
    run(exec, replicates, |r| {
        let d = simulate_gxe(n, 0.0, &mut replicate_rng(seed, r));
        Ok(gxe_interaction_test(&d, false)?.term(VPRS_X_ENV).expect("term").p)
    })
}

/// vPRS x E estimates with a planted interaction.
pub fn planted_interaction_estimates(
    replicates: usize,
    n: usize,
    interaction: f64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    run(exec, replicates, |r| {
        let d = simulate_gxe(n, interaction, &mut replicate_rng(seed, r));
        Ok(gxe_interaction_test(&d, false)?.term(VPRS_X_ENV).expect("term").estimate)
    })
}

/// Per replicate: (adjacent quintile CIs all overlap, estimates monotone).
pub fn quintile_profiles(
    replicates: usize,
    n: usize,
    interaction: f64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<(bool, bool)>> {
    run(exec, replicates, |r| {
        let d = simulate_gxe(n, interaction, &mut replicate_rng(seed, r));
        let q = quintile_effects(&d.pheno, &d.env, &d.vprs, &d.covariates)?;
        let overlap = q.windows(2).all(|w| w[0].ci_lo <= w[1].ci_hi && w[1].ci_lo <= w[0].ci_hi);
        let inc = q.windows(2).all(|w| w[1].estimate >= w[0].estimate);
        let dec = q.windows(2).all(|w| w[1].estimate <= w[0].estimate);
        Ok((overlap, inc || dec))
    })
}

/// Two-sample t-test p-values for samples from one normal population.
pub fn null_ttest_pvalues(replicates: usize, n: usize, seed: u64, exec: Execution) -> Result<Vec<f64>> {
    run(exec, replicates, |r| {
        let mut rng = replicate_rng(seed, r);
        let a: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let b: Vec<f64> = (0..n + n / 2).map(|_| 1.5 * normal(&mut rng)).collect();
        // Unequal variances, equal means.
        Ok(two_sample_ttest(&a, &b, TTestKind::Welch)?.p)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub n: usize,
    /// Treatment effect in the low-score and high-score halves.
    pub effect_low: f64,
    pub effect_high: f64,
    /// Strength of confounding through `bmi` and `hdl`.
    pub confounding: f64,
    pub noise_sd: f64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        TrialSpec {
            n: 2000,
            effect_low: -1.0,
            effect_high: -1.0,
            confounding: 1.0,
            noise_sd: 0.5,
        }
    }
}

/// Longitudinal cohort table with confounded treatment uptake. `bmi` and
/// `hdl` drive both uptake and the change score; `vPRS` modifies the effect.
/// About 10 % are treated at baseline and everyone has pheno_0 above 3.36.
pub fn simulate_trial(spec: &TrialSpec, rng: &mut ChaCha8Rng) -> CohortTable {
    let n = spec.n;
    let mut cols: Vec<(String, Vec<Option<f64>>)> = [
        "pheno_0", "pheno_1", "treated_0", "treated_1", "age", "sex", "bmi", "hdl", "vPRS",
    ]
    .iter()
    .map(|c| (c.to_string(), Vec::with_capacity(n)))
    .collect();
    for _ in 0..n {
        let age = 57.0 + 8.0 * normal(rng);
        let sex = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let bmi = normal(rng);
        let hdl = normal(rng);
        let vprs = normal(rng);
        let p0 = 3.4 + 0.8 * normal(rng).abs();
        let c = spec.confounding;
        let lin = -0.3 + c * (0.8 * bmi - 0.6 * hdl) + 0.5 * (p0 - 4.0);
        let t1 = rng.random_bool(1.0 / (1.0 + (-lin).exp()));
        let t0 = rng.random_bool(0.1);
        let effect = if vprs > 0.0 { spec.effect_high } else { spec.effect_low };
        let delta = -0.2 * (p0 - 4.0) + c * (0.6 * bmi - 0.5 * hdl) + 0.005 * (age - 57.0)
            + if t1 { effect } else { 0.0 }
            + spec.noise_sd * normal(rng);
        let row = [p0, p0 + delta, t0 as u8 as f64, t1 as u8 as f64, age, sex, bmi, hdl, vprs];
        for (col, v) in cols.iter_mut().zip(row) {
            col.1.push(Some(v));
        }
    }
    CohortTable {
        ids: (1..=n).map(|i| format!("S{i}")).collect(),
        columns: cols,
    }
}

pub fn trial_options() -> ParallelGroupOptions {
    ParallelGroupOptions {
        threshold: 3.36,
        exclude_baseline_treated: true,
        confounders: ["pheno_0", "age", "sex", "bmi", "hdl"].map(String::from).to_vec(),
        outcome_covariates: ["pheno_0", "age", "sex"].map(String::from).to_vec(),
        score_column: "vPRS".into(),
        subgroups: vec![(0.25, 0.75)],
        truncate: None,
    }
}

/// Per replicate: (IPTW-weighted, unweighted) treatment-effect estimates.
pub fn iptw_estimates(replicates: usize, spec: &TrialSpec, seed: u64, exec: Execution) -> Result<Vec<(f64, f64)>> {
    let opts = ParallelGroupOptions {
        subgroups: vec![],
        ..trial_options()
    };
    run(exec, replicates, |r| {
        let table = simulate_trial(spec, &mut replicate_rng(seed, r));
        let rep = parallel_group_analysis(&table, &opts)?;
        let est = |f: &super::RegressionFit| f.term(TREATED).expect("term").estimate;
        Ok((est(&rep.weighted), est(&rep.unweighted)))
    })
}

/// Subgroup x treatment p-values on randomized data where subgroup 1 has
/// effect `effect_a` and subgroup 0 has `effect_b`.
pub fn subgroup_pvalues(
    replicates: usize,
    n: usize,
    effect_a: f64,
    effect_b: f64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    run(exec, replicates, |r| {
        let mut rng = replicate_rng(seed, r);
        let mut delta = Vec::with_capacity(n);
        let mut treated = Vec::with_capacity(n);
        let mut sub = Vec::with_capacity(n);
        let mut base = Vec::with_capacity(n);
        for _ in 0..n {
            let s = rng.random_bool(0.5);
            let t = rng.random_bool(0.5);
            let b = 4.0 + 0.5 * normal(&mut rng);
            let eff = if s { effect_a } else { effect_b };
            delta.push(-0.2 * (b - 4.0) + if t { eff } else { 0.0 } + normal(&mut rng));
            treated.push(t);
            sub.push(s);
            base.push(b);
        }
        let fit = subgroup_interaction_test(&delta, &treated, &sub, &[("pheno_0".into(), base)], None)?;
        Ok(fit.term(SUBGROUP_X_TREATED).expect("term").p)
    })
}

pub fn rejection_rate(pvalues: &[f64], alpha: f64) -> f64 {
    pvalues.iter().filter(|p| **p < alpha).count() as f64 / pvalues.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub name: String,
    pub replicates: usize,
    pub rejection_rate_05: f64,
    pub ks_statistic: f64,
    pub ks_p: f64,
}

pub fn summarize(name: &str, pvalues: &[f64]) -> CalibrationSummary {
    let (d, p) = stats::ks_uniform(pvalues);
    CalibrationSummary {
        name: name.to_string(),
        replicates: pvalues.len(),
        rejection_rate_05: rejection_rate(pvalues, 0.05),
        ks_statistic: d,
        ks_p: p,
    }
}

/// Runs every null suite with `replicates` replicates.
pub fn null_suites(replicates: usize, seed: u64, exec: Execution) -> Result<Vec<CalibrationSummary>> {
    Ok(vec![
        summarize("gxe_interaction", &null_interaction_pvalues(replicates, 1000, seed, exec)?),
        summarize("welch_ttest", &null_ttest_pvalues(replicates, 40, seed, exec)?),
        summarize("subgroup_interaction", &subgroup_pvalues(replicates, 400, -1.0, -1.0, seed, exec)?),
    ])
}
