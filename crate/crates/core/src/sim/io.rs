//! Cohort directory layout:
//!
//! | file            | columns                                        |
//! |-----------------|------------------------------------------------|
//! | `genotypes.tsv` | text genotype format                           |
//! | `pheno.tsv`     | FID, IID, baseline, repeat_1 .. repeat_{R-1}   |
//! | `truth.tsv`     | variant_id, beta_true, gamma_true              |
//! | `samples.tsv`   | FID, IID, mu_true, sigma_true                  |
//! | `split.tsv`     | FID, IID, split                                |
//! | `cohort.json`   | spec and true intercepts                       |

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SimSpec, SimulatedCohort, SplitLabel};
use crate::error::{Error, Result};
use crate::genotype::{load_text_matrix, write_text_matrix_with_comment};
use crate::table::{column, parse_f64, read_table};

pub const GENOTYPES: &str = "genotypes.tsv";
pub const PHENO: &str = "pheno.tsv";
pub const TRUTH: &str = "truth.tsv";
pub const SAMPLES: &str = "samples.tsv";
pub const SPLIT: &str = "split.tsv";
pub const META: &str = "cohort.json";

#[derive(Serialize, Deserialize)]
struct CohortMeta {
    spec: SimSpec,
    beta0: f64,
    gamma0: f64,
}

struct Table<'a> {
    path: &'a Path,
    w: BufWriter<fs::File>,
}

impl<'a> Table<'a> {
    fn create(path: &'a Path, comment: Option<&str>, header: &str) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut t = Table {
            path,
            w: BufWriter::new(file),
        };
        if let Some(c) = comment {
            t.line(&format!("# {c}"))?;
        }
        t.line(header)?;
        Ok(t)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.w, "{s}").map_err(|e| Error::io(self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(self.path, e))
    }
}

pub fn write_cohort(cohort: &SimulatedCohort, dir: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let m = &cohort.matrix;
    write_text_matrix_with_comment(m, dir.join(GENOTYPES), comment)?;

    let r = cohort.repeats();
    let mut header = String::from("FID\tIID\tbaseline");
    for k in 1..r {
        header.push_str(&format!("\trepeat_{k}"));
    }
    let path = dir.join(PHENO);
    let mut t = Table::create(&path, comment, &header)?;
    for (i, s) in m.samples().iter().enumerate() {
        let mut row = format!("{}\t{}", s.family_id, s.individual_id);
        for v in cohort.draws(i) {
            row.push_str(&format!("\t{v:?}"));
        }
        t.line(&row)?;
    }
    t.finish()?;

    let path = dir.join(TRUTH);
    let mut t = Table::create(&path, comment, "variant_id\tbeta_true\tgamma_true")?;
    for v in m.variants() {
        let b = cohort.true_beta.get(&v.variant_id).copied().unwrap_or(0.0);
        let g = cohort.true_gamma.get(&v.variant_id).copied().unwrap_or(0.0);
        t.line(&format!("{}\t{b:?}\t{g:?}", v.variant_id))?;
    }
    t.finish()?;

    let path = dir.join(SAMPLES);
    let mut t = Table::create(&path, comment, "FID\tIID\tmu_true\tsigma_true")?;
    for (i, s) in m.samples().iter().enumerate() {
        t.line(&format!(
            "{}\t{}\t{:?}\t{:?}",
            s.family_id, s.individual_id, cohort.mu_true[i], cohort.sigma_true[i]
        ))?;
    }
    t.finish()?;

    let path = dir.join(SPLIT);
    let mut t = Table::create(&path, comment, "FID\tIID\tsplit")?;
    for (i, s) in m.samples().iter().enumerate() {
        t.line(&format!(
            "{}\t{}\t{}",
            s.family_id,
            s.individual_id,
            cohort.split_assignment[i].as_str()
        ))?;
    }
    t.finish()?;

    let meta = CohortMeta {
        spec: cohort.spec.clone(),
        beta0: cohort.beta0,
        gamma0: cohort.gamma0,
    };
    let path = dir.join(META);
    fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))
}

fn require(dir: &Path, name: &str) -> Result<std::path::PathBuf> {
    let p = dir.join(name);
    if p.exists() {
        Ok(p)
    } else {
        Err(Error::Schema(format!("cohort file {} not found", p.display())))
    }
}

/// Per-sample rows keyed by (FID, IID), checked against the genotype samples.
fn keyed_rows(
    path: &Path,
    header: &[String],
    rows: Vec<Vec<String>>,
    samples: &[(String, String)],
) -> Result<Vec<Vec<String>>> {
    let fid = column(header, "FID", path)?;
    let iid = column(header, "IID", path)?;
    let mut by_id: BTreeMap<(String, String), Vec<String>> = rows
        .into_iter()
        .map(|r| ((r[fid].clone(), r[iid].clone()), r))
        .collect();
    samples
        .iter()
        .map(|k| {
            by_id.remove(k).ok_or_else(|| {
                Error::Schema(format!("{}: no row for sample {} {}", path.display(), k.0, k.1))
            })
        })
        .collect()
}

pub fn read_cohort(dir: impl AsRef<Path>) -> Result<SimulatedCohort> {
    let dir = dir.as_ref();
    let meta_path = require(dir, META)?;
    let meta: CohortMeta = serde_json::from_str(
        &fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?,
    )?;
    let matrix = load_text_matrix(require(dir, GENOTYPES)?)?;
    let ids: Vec<(String, String)> = matrix
        .samples()
        .iter()
        .map(|s| (s.family_id.clone(), s.individual_id.clone()))
        .collect();
    let n = ids.len();

    let path = require(dir, PHENO)?;
    let (h, rows) = read_table(&path)?;
    let rows = keyed_rows(&path, &h, rows, &ids)?;
    let first = column(&h, "baseline", &path)?;
    let repeats = h.len() - first;
    let mut longitudinal_y = Vec::with_capacity(n * repeats);
    for r in &rows {
        for v in &r[first..] {
            longitudinal_y.push(parse_f64(v, &path)?);
        }
    }
    let baseline_y = (0..n).map(|i| longitudinal_y[i * repeats]).collect();

    let path = require(dir, TRUTH)?;
    let (h, rows) = read_table(&path)?;
    let (id, b, g) = (
        column(&h, "variant_id", &path)?,
        column(&h, "beta_true", &path)?,
        column(&h, "gamma_true", &path)?,
    );
    let mut true_beta = BTreeMap::new();
    let mut true_gamma = BTreeMap::new();
    for r in &rows {
        let (bv, gv) = (parse_f64(&r[b], &path)?, parse_f64(&r[g], &path)?);
        if bv != 0.0 {
            true_beta.insert(r[id].clone(), bv);
        }
        if gv != 0.0 {
            true_gamma.insert(r[id].clone(), gv);
        }
    }

    let path = require(dir, SAMPLES)?;
    let (h, rows) = read_table(&path)?;
    let rows = keyed_rows(&path, &h, rows, &ids)?;
    let (mc, sc) = (column(&h, "mu_true", &path)?, column(&h, "sigma_true", &path)?);
    let mu_true = rows.iter().map(|r| parse_f64(&r[mc], &path)).collect::<Result<_>>()?;
    let sigma_true = rows.iter().map(|r| parse_f64(&r[sc], &path)).collect::<Result<_>>()?;

    let path = require(dir, SPLIT)?;
    let (h, rows) = read_table(&path)?;
    let rows = keyed_rows(&path, &h, rows, &ids)?;
    let c = column(&h, "split", &path)?;
    let split_assignment = rows
        .iter()
        .map(|r| {
            SplitLabel::parse(&r[c])
                .ok_or_else(|| Error::Format(format!("{}: bad split label {}", path.display(), r[c])))
        })
        .collect::<Result<_>>()?;

    Ok(SimulatedCohort {
        spec: SimSpec {
            repeats,
            ..meta.spec
        },
        matrix,
        true_beta,
        true_gamma,
        beta0: meta.beta0,
        gamma0: meta.gamma0,
        mu_true,
        sigma_true,
        baseline_y,
        longitudinal_y,
        split_assignment,
    })
}
