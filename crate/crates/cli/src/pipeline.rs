use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use lssboost::metrics::{evaluate, EvalReport};
use lssboost::model::{export_coefficients, import_coefficients};
use lssboost::sim::{self, GenotypeModel, SimSpec, SimulatedCohort, SplitLabel};
use lssboost::table::{column, parse_f64, read_sample_column, read_sample_ids, read_table, SampleKey};
use lssboost::{fit, score, standardize, BoostConfig, DataView, GenotypeMatrix, LssModel, StepMode};

use crate::common::{
    config_err, io_err, merge_config, usage, write_json, write_string, write_table, CliResult, GenoArgs,
    Provenance,
};

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum StepModeArg {
    Adaptive,
    Fixed,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub geno: GenoArgs,
    /// Phenotype table with FID and IID columns
    #[arg(long)]
    pub pheno: PathBuf,
    /// Phenotype column; defaults to the first column after FID and IID
    #[arg(long)]
    pub pheno_col: Option<String>,
    /// Table with FID, IID and split (train/valid/test) columns
    #[arg(long, conflicts_with_all = ["train_ids", "valid_ids"])]
    pub split: Option<PathBuf>,
    /// FID/IID list of training samples
    #[arg(long, requires = "valid_ids")]
    pub train_ids: Option<PathBuf>,
    /// FID/IID list of validation samples
    #[arg(long, requires = "train_ids")]
    pub valid_ids: Option<PathBuf>,
    /// JSON object with BoostConfig fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p_batch: Option<usize>,
    #[arg(long)]
    pub m_batch: Option<usize>,
    #[arg(long)]
    pub b_max: Option<usize>,
    #[arg(long)]
    pub b_stop: Option<usize>,
    #[arg(long, value_enum)]
    pub step_mode: Option<StepModeArg>,
    /// Fixed step length
    #[arg(long)]
    pub nu: Option<f64>,
    /// Adaptive mu scale
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Adaptive sigma step
    #[arg(long)]
    pub nu_sigma: Option<f64>,
    /// Boost the mean only
    #[arg(long)]
    pub no_sigma: bool,
    /// Output file prefix
    #[arg(long, default_value = "model")]
    pub prefix: String,
}

impl FitArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve_config(&self) -> CliResult<BoostConfig> {
        let mut cfg = merge_config(&BoostConfig::default(), self.config.as_deref())?;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(p_batch, m_batch, b_max, b_stop);
        let mode = self.step_mode.unwrap_or(match cfg.step_mode {
            StepMode::Fixed { .. } => StepModeArg::Fixed,
            StepMode::Adaptive { .. } => StepModeArg::Adaptive,
        });
        cfg.step_mode = match (mode, cfg.step_mode) {
            (StepModeArg::Fixed, StepMode::Fixed { nu }) => StepMode::Fixed { nu: self.nu.unwrap_or(nu) },
            (StepModeArg::Fixed, _) => StepMode::Fixed { nu: self.nu.unwrap_or(0.1) },
            (StepModeArg::Adaptive, StepMode::Adaptive { lambda, nu_sigma }) => StepMode::Adaptive {
                lambda: self.lambda.unwrap_or(lambda),
                nu_sigma: self.nu_sigma.unwrap_or(nu_sigma),
            },
            (StepModeArg::Adaptive, _) => StepMode::Adaptive {
                lambda: self.lambda.unwrap_or(0.1),
                nu_sigma: self.nu_sigma.unwrap_or(lssboost::boost::ADAPTIVE_SIGMA_STEP),
            },
        };
        if self.no_sigma {
            cfg.sigma_model_enabled = false;
        }
        Ok(cfg)
    }
}

fn sample_keys(g: &GenotypeMatrix) -> Vec<SampleKey> {
    g.samples()
        .iter()
        .map(|s| (s.family_id.clone(), s.individual_id.clone()))
        .collect()
}

fn read_split(path: &Path) -> CliResult<BTreeMap<SampleKey, SplitLabel>> {
    let (h, rows) = read_table(path)?;
    let (f, i, s) = (column(&h, "FID", path)?, column(&h, "IID", path)?, column(&h, "split", path)?);
    rows.into_iter()
        .map(|r| {
            let label = SplitLabel::parse(&r[s]).ok_or_else(|| {
                lssboost::Error::Format(format!("{}: bad split label '{}'", path.display(), r[s]))
            })?;
            Ok(((r[f].clone(), r[i].clone()), label))
        })
        .collect()
}

/// Rows of `g` in `wanted` that have a phenotype, with those phenotypes.
fn pick_rows(
    keys: &[SampleKey],
    wanted: &BTreeSet<SampleKey>,
    pheno: &BTreeMap<SampleKey, f64>,
) -> (Vec<usize>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        if wanted.contains(k) {
            if let Some(v) = pheno.get(k) {
                rows.push(i);
                y.push(*v);
            }
        }
    }
    (rows, y)
}

#[derive(Serialize)]
struct FitEcho<'a> {
    boost: &'a BoostConfig,
    pheno_col: &'a Option<String>,
}

pub fn cmd_fit(a: &FitArgs, out: &Path) -> CliResult<()> {
    let cfg = a.resolve_config()?;
    let prov = Provenance::new("fit", &FitEcho {
        boost: &cfg,
        pheno_col: &a.pheno_col,
    })?;
    let g = a.geno.load()?;
    let pheno = read_sample_column(&a.pheno, a.pheno_col.as_deref())?;
    let (train_set, valid_set): (BTreeSet<SampleKey>, BTreeSet<SampleKey>) = match (&a.split, &a.train_ids, &a.valid_ids) {
        (Some(s), _, _) => {
            let split = read_split(s)?;
            let of = |l: SplitLabel| split.iter().filter(|(_, v)| **v == l).map(|(k, _)| k.clone()).collect();
            (of(SplitLabel::Train), of(SplitLabel::Valid))
        }
        (None, Some(t), Some(v)) => (
            read_sample_ids(t)?.into_iter().collect(),
            read_sample_ids(v)?.into_iter().collect(),
        ),
        _ => return usage("a split is required: --split or --train-ids with --valid-ids"),
    };
    if let Some(k) = train_set.intersection(&valid_set).next() {
        return Err(lssboost::Error::Validation(format!("sample {} {} is in both train and valid", k.0, k.1)).into());
    }
    let keys = sample_keys(&g);
    let (tr_rows, y_tr) = pick_rows(&keys, &train_set, &pheno);
    let (va_rows, y_va) = pick_rows(&keys, &valid_set, &pheno);
    log::info!("{} training and {} validation samples", tr_rows.len(), va_rows.len());
    let g_tr = g.subset_samples(&tr_rows)?;
    let g_va = g.subset_samples(&va_rows)?;

    let start = Instant::now();
    let (model, trace) = fit(DataView::new(&g_tr, &y_tr), DataView::new(&g_va, &y_va), &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    log::info!("fit finished in {secs:.2}s, m_stop = {}", model.m_stop);

    let comment = prov.comment();
    let coef = out.join(format!("{}.coef.tsv", a.prefix));
    export_coefficients(&model, &coef, Some(&comment))?;
    trace.write_tsv(out.join(format!("{}.trace.tsv", a.prefix)), Some(&comment))?;
    write_json(&out.join(format!("{}.timing.json", a.prefix)), &json!({ "fit_seconds": secs }))?;
    prov.write_run_json(
        out,
        &format!("{}.run.json", a.prefix),
        json!({
            "geno": a.geno.describe(),
            "pheno": a.pheno,
            "split": a.split,
            "train_ids": a.train_ids,
            "valid_ids": a.valid_ids,
            "config_file": a.config,
            "n_train": tr_rows.len(),
            "n_valid": va_rows.len(),
        }),
    )
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Coefficient TSV written by `fit`
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub geno: GenoArgs,
    /// Scores TSV whose vPRS column is the standardization reference
    #[arg(long)]
    pub reference_scores: Option<PathBuf>,
    #[arg(long, default_value = "scores")]
    pub prefix: String,
}

fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub const SCORE_HEADER: &str = "FID\tIID\tmPRS\tvPRS\tvPRS_std";

pub fn cmd_score(a: &ScoreArgs, out: &Path) -> CliResult<()> {
    if !a.geno.is_set() {
        return usage("score needs genotypes: --geno/--text-geno, --bfile or --bed/--bim/--fam");
    }
    let reference_hash = a.reference_scores.as_deref().map(file_sha256).transpose()?;
    let prov = Provenance::new("score", &json!({
        "model_sha256": file_sha256(&a.model)?,
        "reference_sha256": reference_hash,
    }))?;
    let model = import_coefficients(&a.model)?;
    let g = a.geno.load()?;
    let (m, v) = score(&model, &g)?;
    let reference = match &a.reference_scores {
        Some(p) => {
            let (h, rows) = read_table(p)?;
            let c = column(&h, "vPRS", p)?;
            rows.iter().map(|r| parse_f64(&r[c], p)).collect::<lssboost::Result<Vec<f64>>>()?
        }
        None => v.clone(),
    };
    let z = standardize(&v, &reference)?;
    let rows: Vec<String> = g
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}\t{}\t{:?}\t{:?}\t{:?}", s.family_id, s.individual_id, m[i], v[i], z[i]))
        .collect();
    write_table(&out.join(format!("{}.tsv", a.prefix)), &prov, SCORE_HEADER, &rows)?;
    prov.write_run_json(
        out,
        &format!("{}.run.json", a.prefix),
        json!({ "model": a.model, "geno": a.geno.describe(), "reference_scores": a.reference_scores }),
    )
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON object with SimSpec fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// One or more heritabilities (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub h2: Vec<f64>,
    /// One or more sparsity levels (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub sparsity: Vec<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// train,valid,test fractions
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub split: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub maf_low: Option<f64>,
    #[arg(long)]
    pub maf_high: Option<f64>,
    /// Simulate phenotypes on these genotypes instead of drawing new ones
    #[command(flatten)]
    pub geno: GenoArgs,
}

impl SimulateArgs {
    pub fn resolve(&self) -> CliResult<(SimSpec, Vec<f64>, Vec<f64>)> {
        let mut spec = merge_config(&SimSpec::default(), self.config.as_deref())?;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { spec.$f = v; })* };
        }
        set!(n, p, repeats, seed);
        if let Some(s) = &self.split {
            let arr: [f64; 3] = s
                .as_slice()
                .try_into()
                .map_err(|_| config_err(format!("--split needs 3 fractions, got {}", s.len())))?;
            spec.split = arr;
        }
        if self.maf_low.is_some() || self.maf_high.is_some() {
            let (lo, hi) = match spec.genotype_model {
                GenotypeModel::MafUniform { low, high } => (low, high),
                GenotypeModel::FromMatrix => (0.05, 0.5),
            };
            spec.genotype_model = GenotypeModel::MafUniform {
                low: self.maf_low.unwrap_or(lo),
                high: self.maf_high.unwrap_or(hi),
            };
        }
        let h2s = if self.h2.is_empty() { vec![spec.h2] } else { self.h2.clone() };
        let ss = if self.sparsity.is_empty() { vec![spec.sparsity] } else { self.sparsity.clone() };
        Ok((spec, h2s, ss))
    }
}

/// Directory name of one grid cell.
pub fn cell_name(spec: &SimSpec) -> String {
    format!("h2_{}_s_{}", spec.h2, spec.sparsity)
}

/// The generating model of a cohort as an `LssModel`.
pub fn truth_model(c: &SimulatedCohort) -> LssModel {
    let mut m = LssModel::intercept_only(c.beta0, c.gamma0);
    m.beta = c.true_beta.clone();
    m.gamma = c.true_gamma.clone();
    for v in c.matrix.variants() {
        if m.beta.contains_key(&v.variant_id) || m.gamma.contains_key(&v.variant_id) {
            m.alleles.insert(v.variant_id.clone(), v.allele1.clone());
        }
    }
    m
}

pub const TRUTH_MODEL: &str = "truth.coef.tsv";

pub fn cmd_simulate(a: &SimulateArgs, out: &Path) -> CliResult<()> {
    let (mut base, h2s, ss) = a.resolve()?;
    let supplied = if a.geno.is_set() {
        let g = a.geno.load()?;
        base.genotype_model = GenotypeModel::FromMatrix;
        base.n = g.n_samples();
        base.p = g.n_variants();
        Some(g)
    } else {
        None
    };
    let specs = sim::grid(&base, &h2s, &ss);
    for s in &specs {
        s.validate()?;
    }
    let prov = Provenance::new("simulate", &json!({ "base": base, "h2": h2s, "sparsity": ss }))?;
    let comment = prov.comment();
    let mut cells = Vec::new();
    for spec in &specs {
        let cohort = match &supplied {
            Some(g) => sim::simulate_on(spec, g.clone())?,
            None => sim::simulate(spec)?,
        };
        let dir = out.join(cell_name(spec));
        sim::write_cohort(&cohort, &dir, Some(&comment))?;
        export_coefficients(&truth_model(&cohort), dir.join(TRUTH_MODEL), Some(&comment))?;
        log::info!("wrote {}", dir.display());
        cells.push(cell_name(spec));
    }
    prov.write_run_json(out, "simulate.run.json", json!({ "geno": a.geno.describe(), "cells": cells }))
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Coefficient TSV written by `fit`
    #[arg(long)]
    pub model: PathBuf,
    /// Cohort directory written by `simulate`
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long, default_value = "report")]
    pub prefix: String,
}

pub const REPORTS_TSV: &str = "reports.tsv";

/// `x.coef.tsv` -> `x.timing.json`.
fn timing_path(model: &Path) -> Option<PathBuf> {
    let name = model.file_name()?.to_str()?;
    let stem = name.strip_suffix(".coef.tsv")?;
    Some(model.with_file_name(format!("{stem}.timing.json")))
}

fn fit_seconds(model: &Path) -> CliResult<f64> {
    let Some(p) = timing_path(model).filter(|p| p.exists()) else {
        return Ok(0.0);
    };
    let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(lssboost::Error::from)?;
    Ok(v["fit_seconds"].as_f64().unwrap_or(0.0))
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &Path) -> CliResult<()> {
    let prov = Provenance::new("evaluate", &json!({ "model_sha256": file_sha256(&a.model)? }))?;
    let cohort = sim::read_cohort(&a.cohort)?;
    let model = import_coefficients(&a.model)?;
    let report: EvalReport = evaluate(&model, &cohort, fit_seconds(&a.model)?)?;
    write_json(&out.join(format!("{}.json", a.prefix)), &report)?;

    let row = format!("{}\t{}\t{}", a.model.display(), a.cohort.display(), report.tsv_row());
    let path = out.join(REPORTS_TSV);
    let mut text = if path.exists() {
        fs::read_to_string(&path).map_err(|e| io_err(&path, e))?
    } else {
        format!("# {}\nmodel\tcohort\t{}\n", prov.comment(), EvalReport::tsv_header())
    };
    if !text.lines().any(|l| l == row) {
        text.push_str(&row);
        text.push('\n');
    }
    write_string(&path, &text)?;
    prov.write_run_json(
        out,
        &format!("{}.run.json", a.prefix),
        json!({ "model": a.model, "cohort": a.cohort }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_path_from_coef() {
        assert_eq!(timing_path(Path::new("a/m.coef.tsv")), Some(PathBuf::from("a/m.timing.json")));
        assert_eq!(timing_path(Path::new("a/m.tsv")), None);
    }

    #[test]
    fn cell_names() {
        let s = SimSpec { h2: 0.1, sparsity: 0.001, ..SimSpec::default() };
        assert_eq!(cell_name(&s), "h2_0.1_s_0.001");
    }
}
