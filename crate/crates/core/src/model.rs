//! Gaussian location-scale model: `y ~ N(mu, sigma^2)` with
//! `mu = beta0 + g'beta` and `log(sigma) = gamma0 + g'gamma`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::par::{self, Execution};

/// Bounds applied to the log-SD linear predictor before exponentiation.
pub const ETA_MIN: f64 = -15.0;
pub const ETA_MAX: f64 = 15.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub const MU_INTERCEPT_ROW: &str = "(intercept_mu)";
pub const SIGMA_INTERCEPT_ROW: &str = "(intercept_sigma)";
const COEF_HEADER: [&str; 4] = ["variant_id", "allele1", "beta", "gamma"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Mu,
    Sigma,
}

impl std::fmt::Display for Parameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parameter::Mu => "mu",
            Parameter::Sigma => "sigma",
        })
    }
}

/// One applied boosting update. Increments already include the step length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub iteration: usize,
    pub parameter: Parameter,
    /// `None` marks an intercept-only update.
    pub variant_id: Option<String>,
    pub intercept_increment: f64,
    pub slope_increment: f64,
    pub step_length_used: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Coefficients {
    pub beta0: f64,
    pub gamma0: f64,
    pub beta: BTreeMap<String, f64>,
    pub gamma: BTreeMap<String, f64>,
}

/// Fitting metadata carried in the JSON sidecar.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub config: Option<serde_json::Value>,
    pub validation_loss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LssModel {
    pub init_beta0: f64,
    pub init_gamma0: f64,
    pub beta0: f64,
    pub gamma0: f64,
    pub beta: BTreeMap<String, f64>,
    pub gamma: BTreeMap<String, f64>,
    /// allele1 of every variant appearing in `beta` or `gamma`.
    pub alleles: BTreeMap<String, String>,
    pub update_log: Vec<UpdateRecord>,
    pub m_stop: usize,
    /// False when the model was imported without its update log.
    pub log_complete: bool,
    pub meta: FitMetadata,
}

impl LssModel {
    pub fn intercept_only(beta0: f64, gamma0: f64) -> Self {
        LssModel {
            init_beta0: beta0,
            init_gamma0: gamma0,
            beta0,
            gamma0,
            beta: BTreeMap::new(),
            gamma: BTreeMap::new(),
            alleles: BTreeMap::new(),
            update_log: Vec::new(),
            m_stop: 0,
            log_complete: true,
            meta: FitMetadata::default(),
        }
    }

    /// Coefficients after replaying the update log through iteration `upto`.
    pub fn coefficients_at(&self, upto: usize) -> Coefficients {
        let mut c = Coefficients {
            beta0: self.init_beta0,
            gamma0: self.init_gamma0,
            ..Default::default()
        };
        for rec in self.update_log.iter().take_while(|r| r.iteration <= upto) {
            let (intercept, map) = match rec.parameter {
                Parameter::Mu => (&mut c.beta0, &mut c.beta),
                Parameter::Sigma => (&mut c.gamma0, &mut c.gamma),
            };
            *intercept += rec.intercept_increment;
            if let Some(id) = &rec.variant_id {
                *map.entry(id.clone()).or_insert(0.0) += rec.slope_increment;
            }
        }
        c
    }

    pub fn stored_coefficients(&self) -> Coefficients {
        Coefficients {
            beta0: self.beta0,
            gamma0: self.gamma0,
            beta: self.beta.clone(),
            gamma: self.gamma.clone(),
        }
    }

    /// Replaces the stored coefficients by the replay through `m`.
    pub fn truncate_to(&mut self, m: usize) {
        let c = self.coefficients_at(m);
        self.beta0 = c.beta0;
        self.gamma0 = c.gamma0;
        self.beta = c.beta;
        self.gamma = c.gamma;
        self.m_stop = m;
    }

    /// Variants with a nonzero coefficient in the given sub-model.
    pub fn selected(&self, parameter: Parameter) -> BTreeSet<String> {
        let map = match parameter {
            Parameter::Mu => &self.beta,
            Parameter::Sigma => &self.gamma,
        };
        map.iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn last_iteration(&self) -> usize {
        self.meta
            .validation_loss
            .len()
            .max(self.update_log.last().map_or(0, |r| r.iteration))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// log(sigma), clamped to `[ETA_MIN, ETA_MAX]`.
    pub eta_sigma: Vec<f64>,
}

impl Prediction {
    pub fn from_predictors(mu: Vec<f64>, eta: Vec<f64>) -> Self {
        let eta_sigma: Vec<f64> = eta.into_iter().map(clamp_eta).collect();
        let sigma = eta_sigma.iter().map(|e| e.exp()).collect();
        Prediction {
            mu,
            sigma,
            eta_sigma,
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

#[inline]
pub fn clamp_eta(eta: f64) -> f64 {
    eta.clamp(ETA_MIN, ETA_MAX)
}

/// Per-observation negative log-likelihood with `eta = log(sigma)`.
#[inline]
pub fn nll_obs(y: f64, mu: f64, eta: f64) -> f64 {
    let z = (y - mu) * (-eta).exp();
    HALF_LN_2PI + eta + 0.5 * z * z
}

fn check_inputs(y: &[f64], pred: &Prediction) -> Result<()> {
    if y.len() != pred.len() || pred.sigma.len() != pred.len() || pred.eta_sigma.len() != pred.len()
    {
        return Err(Error::Validation(format!(
            "length mismatch: y has {}, prediction has {}",
            y.len(),
            pred.len()
        )));
    }
    let finite = y.iter().all(|v| v.is_finite())
        && pred.mu.iter().all(|v| v.is_finite())
        && pred.eta_sigma.iter().all(|v| v.is_finite())
        && pred.sigma.iter().all(|&s| s.is_finite() && s > 0.0);
    if !finite {
        return Err(Error::Numeric("non-finite phenotype or prediction".into()));
    }
    Ok(())
}

/// Mean negative log-likelihood, including the `0.5 log(2 pi)` constant.
pub fn nll_loss(y: &[f64], pred: &Prediction) -> Result<f64> {
    check_inputs(y, pred)?;
    if y.is_empty() {
        return Err(Error::InsufficientData("empty phenotype vector".into()));
    }
    let total: f64 = y
        .iter()
        .zip(&pred.mu)
        .zip(&pred.eta_sigma)
        .map(|((&y, &m), &e)| nll_obs(y, m, e))
        .sum();
    Ok(total / y.len() as f64)
}

/// Negative gradient of the NLL with respect to mu: `(y - mu) / sigma^2`.
pub fn residual_mu(y: &[f64], pred: &Prediction) -> Result<Vec<f64>> {
    check_inputs(y, pred)?;
    Ok(y.iter()
        .zip(&pred.mu)
        .zip(&pred.sigma)
        .map(|((&y, &m), &s)| (y - m) / (s * s))
        .collect())
}

/// Negative gradient of the NLL with respect to `log(sigma)`:
/// `(y - mu)^2 / sigma^2 - 1`.
pub fn residual_sigma(y: &[f64], pred: &Prediction) -> Result<Vec<f64>> {
    check_inputs(y, pred)?;
    Ok(y.iter()
        .zip(&pred.mu)
        .zip(&pred.sigma)
        .map(|((&y, &m), &s)| {
            let d = y - m;
            d * d / (s * s) - 1.0
        })
        .collect())
}

fn resolve(map: &BTreeMap<String, f64>, matrix: &GenotypeMatrix, missing: &mut Vec<String>) -> Vec<(usize, f64)> {
    map.iter()
        .filter_map(|(id, &c)| match matrix.variant_index(id) {
            Some(j) => Some((j, c)),
            None => {
                missing.push(id.clone());
                None
            }
        })
        .collect()
}

fn linear_predictor(intercept: f64, terms: &[(usize, f64)], matrix: &GenotypeMatrix) -> Vec<f64> {
    let mut out = vec![intercept; matrix.n_samples()];
    par::for_each_chunk_mut(Execution::default(), &mut out, 4096, |start, chunk| {
        for &(j, c) in terms {
            matrix.add_linear_range(j, 0.0, c, start, chunk);
        }
    });
    out
}

/// Predicts mu and sigma for every sample of `matrix`.
///
/// `at_iteration` replays the update log up to that iteration; `None` uses the
/// stored (m_stop) coefficients.
pub fn predict(model: &LssModel, matrix: &GenotypeMatrix, at_iteration: Option<usize>) -> Result<Prediction> {
    let coefs = match at_iteration {
        None => model.stored_coefficients(),
        Some(m) if m == model.m_stop => model.stored_coefficients(),
        Some(m) => {
            if !model.log_complete {
                return Err(Error::Validation(
                    "model was imported without its update log; only m_stop is available".into(),
                ));
            }
            model.coefficients_at(m)
        }
    };
    let mut missing = Vec::new();
    let beta = resolve(&coefs.beta, matrix, &mut missing);
    let gamma = resolve(&coefs.gamma, matrix, &mut missing);
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingVariants(missing));
    }
    let mu = linear_predictor(coefs.beta0, &beta, matrix);
    let eta = linear_predictor(coefs.gamma0, &gamma, matrix);
    Ok(Prediction::from_predictors(mu, eta))
}

/// Returns `(mPRS, vPRS)`: the mu and log-sigma linear predictors, intercepts included.
pub fn score(model: &LssModel, matrix: &GenotypeMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = predict(model, matrix, None)?;
    Ok((p.mu, p.eta_sigma))
}

/// Centres and scales `scores` by the mean and sample SD of `reference`.
pub fn standardize(scores: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    if reference.len() < 2 {
        return Err(Error::Degenerate(
            "reference needs at least two values".into(),
        ));
    }
    let m = crate::stats::mean(reference);
    let sd = crate::stats::sample_sd(reference);
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Degenerate(
            "reference scores have zero variance".into(),
        ));
    }
    Ok(scores.iter().map(|s| (s - m) / sd).collect())
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: Option<serde_json::Value>,
    m_stop: usize,
    init_beta0: f64,
    init_gamma0: f64,
    validation_loss: Vec<f64>,
    update_log: Vec<UpdateRecord>,
}

pub fn sidecar_path(tsv: &Path) -> PathBuf {
    tsv.with_extension("json")
}

/// Writes the coefficient TSV and its JSON sidecar (same stem, `.json`).
/// `comment` becomes a leading `# ...` line.
pub fn export_coefficients(model: &LssModel, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if let Some(c) = comment {
        writeln!(w, "# {c}").map_err(io)?;
    }
    writeln!(w, "{}", COEF_HEADER.join("\t")).map_err(io)?;
    writeln!(w, "{MU_INTERCEPT_ROW}\t.\t{:?}\t{:?}", model.beta0, 0.0).map_err(io)?;
    writeln!(w, "{SIGMA_INTERCEPT_ROW}\t.\t{:?}\t{:?}", 0.0, model.gamma0).map_err(io)?;
    let ids: BTreeSet<&String> = model.beta.keys().chain(model.gamma.keys()).collect();
    for id in ids {
        let allele = model.alleles.get(id).map_or(".", String::as_str);
        let b = model.beta.get(id).copied().unwrap_or(0.0);
        let g = model.gamma.get(id).copied().unwrap_or(0.0);
        writeln!(w, "{id}\t{allele}\t{b:?}\t{g:?}").map_err(io)?;
    }
    w.flush().map_err(io)?;

    let side = Sidecar {
        config: model.meta.config.clone(),
        m_stop: model.m_stop,
        init_beta0: model.init_beta0,
        init_gamma0: model.init_gamma0,
        validation_loss: model.meta.validation_loss.clone(),
        update_log: model.update_log.clone(),
    };
    let sp = sidecar_path(path);
    let json = serde_json::to_string_pretty(&side)?;
    fs::write(&sp, json).map_err(|e| Error::io(&sp, e))
}

/// Reads a coefficient TSV and, when present, its JSON sidecar.
pub fn import_coefficients(path: impl AsRef<Path>) -> Result<LssModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut model = parse_coefficients(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let sp = sidecar_path(path);
    if sp.exists() {
        let raw = fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
        let side: Sidecar = serde_json::from_str(&raw)?;
        model.init_beta0 = side.init_beta0;
        model.init_gamma0 = side.init_gamma0;
        model.m_stop = side.m_stop;
        model.update_log = side.update_log;
        model.log_complete = true;
        model.meta = FitMetadata {
            config: side.config,
            validation_loss: side.validation_loss,
        };
    }
    Ok(model)
}

fn parse_coefficients(text: &str) -> std::result::Result<LssModel, String> {
    let mut rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = rows.next().ok_or("empty coefficient file")?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols != COEF_HEADER {
        return Err(format!(
            "header must be '{}', found '{}'",
            COEF_HEADER.join("\t"),
            header
        ));
    }
    let num = |s: &str, k: usize| -> std::result::Result<f64, String> {
        s.parse::<f64>()
            .map_err(|_| format!("line {}: bad number '{s}'", k + 1))
    };
    let mut model = LssModel::intercept_only(0.0, 0.0);
    model.log_complete = false;
    let mut seen_mu = false;
    let mut seen_sigma = false;
    for (k, line) in rows {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(format!("line {}: expected 4 columns, found {}", k + 1, f.len()));
        }
        let (b, g) = (num(f[2], k)?, num(f[3], k)?);
        match f[0] {
            MU_INTERCEPT_ROW => {
                model.beta0 = b;
                seen_mu = true;
            }
            SIGMA_INTERCEPT_ROW => {
                model.gamma0 = g;
                seen_sigma = true;
            }
            id => {
                if !(seen_mu && seen_sigma) {
                    return Err("intercept rows must precede variant rows".into());
                }
                if b != 0.0 {
                    model.beta.insert(id.to_string(), b);
                }
                if g != 0.0 {
                    model.gamma.insert(id.to_string(), g);
                }
                model.alleles.insert(id.to_string(), f[1].to_string());
            }
        }
    }
    if !(seen_mu && seen_sigma) {
        return Err("missing intercept rows".into());
    }
    model.init_beta0 = model.beta0;
    model.init_gamma0 = model.gamma0;
    Ok(model)
}
