//! Batch-wise cyclical component-wise gradient boosting for the Gaussian
//! location-scale model.
//!
//! Each outer round screens all variants against the current working
//! residuals of mu and log(sigma) and keeps the `p_batch` most correlated
//! variants per parameter. The inner loop then alternates one mu and one
//! sigma update on those batches. A parameter stops early for the rest of the
//! batch once its best in-batch correlation drops below the largest
//! correlation that was left outside the batch at build time. Outer rounds end
//! after `b_max` batches or when the best validation loss of `b_stop`
//! consecutive batches failed to improve; the returned model is truncated at
//! the iteration with minimal validation loss.

mod batch;
mod step;
mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use batch::{batch_from_correlations, best_in_batch, build_batch, Batch};
pub use step::{adaptive_step_mu, StepMode, ADAPTIVE_SIGMA_STEP};
pub use trace::{
    select_m_stop, BatchEnd, BatchRecord, FitTrace, IterationRecord, OuterStop, StepOutcome,
};

use crate::error::{Error, Result};
use crate::genotype::{CenteredTarget, GenotypeMatrix, Imputation};
use crate::model::{nll_obs, LssModel, Parameter, UpdateRecord, ETA_MAX, ETA_MIN};
use crate::par::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub p_batch: usize,
    pub m_batch: usize,
    pub b_max: usize,
    pub b_stop: usize,
    pub step_mode: StepMode,
    /// Bounds on log(sigma) while fitting.
    pub eta_clamp: [f64; 2],
    /// `false` keeps log(sigma) at its initial value (mean-only boosting).
    pub sigma_model_enabled: bool,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            p_batch: 1000,
            m_batch: 1000,
            b_max: 50,
            b_stop: 2,
            step_mode: StepMode::default(),
            eta_clamp: [ETA_MIN, ETA_MAX],
            sigma_model_enabled: true,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.p_batch == 0 || self.m_batch == 0 || self.b_max == 0 || self.b_stop == 0 {
            return bad("p_batch, m_batch, b_max and b_stop must all be >= 1".into());
        }
        if self.p_batch > p {
            return bad(format!("p_batch = {} exceeds the {p} available variants", self.p_batch));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        let ok = match self.step_mode {
            StepMode::Fixed { nu } => positive(nu),
            StepMode::Adaptive { lambda, nu_sigma } => positive(lambda) && positive(nu_sigma),
        };
        if !ok {
            return bad("step lengths must be positive and finite".into());
        }
        let [lo, hi] = self.eta_clamp;
        if !(lo < hi) || lo < ETA_MIN || hi > ETA_MAX {
            return bad(format!(
                "eta_clamp must satisfy {ETA_MIN} <= lo < hi <= {ETA_MAX}"
            ));
        }
        Ok(())
    }
}

/// Genotypes plus phenotype for one data split.
#[derive(Clone, Copy, Debug)]
pub struct DataView<'a> {
    pub genotypes: &'a GenotypeMatrix,
    pub phenotype: &'a [f64],
}

impl<'a> DataView<'a> {
    pub fn new(genotypes: &'a GenotypeMatrix, phenotype: &'a [f64]) -> Self {
        DataView {
            genotypes,
            phenotype,
        }
    }
}

/// Linear predictors and working residuals for one data split.
struct SplitState<'a> {
    g: &'a GenotypeMatrix,
    y: &'a [f64],
    mu: Vec<f64>,
    eta: Vec<f64>,
    clamp: [f64; 2],
}

impl<'a> SplitState<'a> {
    fn new(view: DataView<'a>, beta0: f64, gamma0: f64, clamp: [f64; 2]) -> Self {
        let n = view.phenotype.len();
        SplitState {
            g: view.genotypes,
            y: view.phenotype,
            mu: vec![beta0; n],
            eta: vec![gamma0; n],
            clamp,
        }
    }

    #[inline]
    fn eta_at(&self, i: usize) -> f64 {
        self.eta[i].clamp(self.clamp[0], self.clamp[1])
    }

    fn loss(&self) -> f64 {
        let total: f64 = (0..self.y.len())
            .map(|i| nll_obs(self.y[i], self.mu[i], self.eta_at(i)))
            .sum();
        total / self.y.len() as f64
    }

    fn residual_mu(&self) -> Vec<f64> {
        (0..self.y.len())
            .map(|i| (self.y[i] - self.mu[i]) * (-2.0 * self.eta_at(i)).exp())
            .collect()
    }

    fn residual_sigma(&self) -> Vec<f64> {
        (0..self.y.len())
            .map(|i| {
                let d = self.y[i] - self.mu[i];
                d * d * (-2.0 * self.eta_at(i)).exp() - 1.0
            })
            .collect()
    }

    fn sigma(&self) -> Vec<f64> {
        (0..self.y.len()).map(|i| self.eta_at(i).exp()).collect()
    }
}

struct Engine<'a> {
    cfg: &'a BoostConfig,
    exec: Execution,
    train: SplitState<'a>,
    valid: SplitState<'a>,
    /// train variant index -> valid variant index
    valid_index: Vec<usize>,
    model: LssModel,
}

impl<'a> Engine<'a> {
    /// One sub-update for `parameter` on `batch`. Returns the outcome.
    fn step(&mut self, parameter: Parameter, batch: &mut Batch, iteration: usize) -> Result<StepOutcome> {
        if batch.early_stop_flag {
            return Ok(StepOutcome::Skipped);
        }
        let residual = match parameter {
            Parameter::Mu => self.train.residual_mu(),
            Parameter::Sigma => self.train.residual_sigma(),
        };
        let target = CenteredTarget::new(&residual)?;
        let g = self.train.g;
        let corrs = g.correlations(&batch.variant_indices, &target, self.exec);
        let pos = best_in_batch(&batch.variant_indices, &corrs)
            .ok_or_else(|| Error::Config("empty batch".into()))?;
        let best = corrs[pos];
        if best.abs() < batch.c_stop {
            batch.early_stop_flag = true;
            return Ok(StepOutcome::EarlyStopped {
                best_correlation: best,
            });
        }
        let j = batch.variant_indices[pos];
        let (b0, b1) = g.simple_regression(j, &target);
        let step = match (parameter, self.cfg.step_mode) {
            (Parameter::Mu, StepMode::Fixed { nu }) => nu,
            (Parameter::Mu, StepMode::Adaptive { lambda, .. }) => {
                let dosage = g.dosage_column(j, Imputation::Mean)?;
                let fitted: Vec<f64> = dosage.iter().map(|d| b0 + b1 * d).collect();
                adaptive_step_mu(&fitted, &self.train.sigma(), lambda)
            }
            (Parameter::Sigma, mode) => mode.sigma_step(),
        };
        let inc0 = step * b0;
        let inc1 = step * b1;
        if !(inc0.is_finite() && inc1.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite {parameter} update at iteration {iteration}"
            )));
        }
        let variant_id = g.variants()[j].variant_id.clone();
        let vj = self.valid_index[j];
        let (intercept, coefs, train_pred, valid_pred) = match parameter {
            Parameter::Mu => (
                &mut self.model.beta0,
                &mut self.model.beta,
                &mut self.train.mu,
                &mut self.valid.mu,
            ),
            Parameter::Sigma => (
                &mut self.model.gamma0,
                &mut self.model.gamma,
                &mut self.train.eta,
                &mut self.valid.eta,
            ),
        };
        *intercept += inc0;
        *coefs.entry(variant_id.clone()).or_insert(0.0) += inc1;
        g.add_linear(j, inc0, inc1, train_pred);
        self.valid.g.add_linear(vj, inc0, inc1, valid_pred);
        self.model
            .alleles
            .entry(variant_id.clone())
            .or_insert_with(|| g.variants()[j].allele1.clone());
        self.model.update_log.push(UpdateRecord {
            iteration,
            parameter,
            variant_id: Some(variant_id.clone()),
            intercept_increment: inc0,
            slope_increment: inc1,
            step_length_used: step,
        });
        Ok(StepOutcome::Updated {
            variant_index: j,
            variant_id,
            correlation: best,
            step_length: step,
        })
    }
}

fn check_inputs(train: &DataView, valid: &DataView, cfg: &BoostConfig) -> Result<Vec<usize>> {
    let (g, y) = (train.genotypes, train.phenotype);
    if y.len() != g.n_samples() || valid.phenotype.len() != valid.genotypes.n_samples() {
        return Err(Error::Validation(
            "phenotype length does not match genotype sample count".into(),
        ));
    }
    if y.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "training set has {} samples, need at least 10",
            y.len()
        )));
    }
    if valid.phenotype.is_empty() {
        return Err(Error::InsufficientData("validation set is empty".into()));
    }
    if y.iter().chain(valid.phenotype).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite phenotype value".into()));
    }
    cfg.validate(g.n_variants())?;
    if valid.genotypes.n_variants() != g.n_variants() {
        return Err(Error::Validation(format!(
            "training has {} variants, validation has {}",
            g.n_variants(),
            valid.genotypes.n_variants()
        )));
    }
    let mut missing = Vec::new();
    let map: Vec<usize> = g
        .variants()
        .iter()
        .map(|v| {
            valid.genotypes.variant_index(&v.variant_id).unwrap_or_else(|| {
                missing.push(v.variant_id.clone());
                0
            })
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingVariants(missing));
    }
    Ok(map)
}

/// Fits mu and log-sigma sub-models on `train`, tracking loss on `valid`.
pub fn fit(train: DataView, valid: DataView, cfg: &BoostConfig) -> Result<(LssModel, FitTrace)> {
    fit_with(train, valid, cfg, Execution::default())
}

pub fn fit_with(
    train: DataView,
    valid: DataView,
    cfg: &BoostConfig,
    exec: Execution,
) -> Result<(LssModel, FitTrace)> {
    let valid_index = check_inputs(&train, &valid, cfg)?;
    let y = train.phenotype;
    let beta0 = crate::stats::mean(y);
    let sd = crate::stats::sample_sd(y);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("training phenotype has zero variance".into()));
    }
    let gamma0 = sd.ln();

    let mut model = LssModel::intercept_only(beta0, gamma0);
    model.meta.config = Some(serde_json::to_value(cfg)?);
    let mut eng = Engine {
        cfg,
        exec,
        train: SplitState::new(train, beta0, gamma0, cfg.eta_clamp),
        valid: SplitState::new(valid, beta0, gamma0, cfg.eta_clamp),
        valid_index,
        model,
    };
    let g = train.genotypes;
    g.column_stats();
    valid.genotypes.column_stats();

    let initial_train_loss = eng.train.loss();
    let initial_valid_loss = eng.valid.loss();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut batches = Vec::new();
    let mut best_valid = initial_valid_loss;
    let mut stale = 0usize;
    let mut stop = OuterStop::MaxBatches;
    let mut m = 0usize;

    for k in 1..=cfg.b_max {
        let mut mu_batch = build_batch(g, &eng.train.residual_mu(), cfg.p_batch, Parameter::Mu, exec)?;
        let mut sigma_batch = if cfg.sigma_model_enabled {
            Some(build_batch(
                g,
                &eng.train.residual_sigma(),
                cfg.p_batch,
                Parameter::Sigma,
                exec,
            )?)
        } else {
            None
        };
        let first_iteration = m + 1;
        let mut end = BatchEnd::IterationLimit;
        for _l in 1..=cfg.m_batch {
            let sigma_done = sigma_batch.as_ref().is_none_or(|b| b.early_stop_flag);
            if mu_batch.early_stop_flag && sigma_done {
                end = BatchEnd::BothStopped;
                break;
            }
            m += 1;
            let mu = eng.step(Parameter::Mu, &mut mu_batch, m)?;
            let train_loss_after_mu = eng.train.loss();
            let sigma = match sigma_batch.as_mut() {
                Some(b) => eng.step(Parameter::Sigma, b, m)?,
                None => StepOutcome::Disabled,
            };
            let train_loss = eng.train.loss();
            let valid_loss = eng.valid.loss();
            if !valid_loss.is_finite() || !train_loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss at iteration {m}")));
            }
            iterations.push(IterationRecord {
                iteration: m,
                batch: k,
                mu,
                sigma,
                train_loss_after_mu,
                train_loss,
                valid_loss,
            });
        }
        if iterations.len() >= first_iteration
            && mu_batch.early_stop_flag
            && sigma_batch.as_ref().is_none_or(|b| b.early_stop_flag)
        {
            end = BatchEnd::BothStopped;
        }
        let batch_best = iterations[first_iteration - 1..]
            .iter()
            .map(|r| r.valid_loss)
            .fold(f64::INFINITY, f64::min);
        batches.push(BatchRecord {
            k,
            first_iteration,
            last_iteration: m,
            mu_c_stop: mu_batch.c_stop,
            mu_top_correlation: mu_batch.correlations.first().copied().unwrap_or(0.0),
            sigma_c_stop: sigma_batch.as_ref().map(|b| b.c_stop),
            sigma_top_correlation: sigma_batch
                .as_ref()
                .map(|b| b.correlations.first().copied().unwrap_or(0.0)),
            best_valid_loss: batch_best,
            end,
        });
        log::debug!(
            "batch {k}: iterations {first_iteration}..={m}, best valid loss {batch_best:.6}"
        );
        if batch_best < best_valid {
            best_valid = batch_best;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.b_stop {
                stop = OuterStop::NoImprovement;
                break;
            }
        }
    }

    let valid_losses: Vec<f64> = iterations.iter().map(|r| r.valid_loss).collect();
    let m_stop = select_m_stop(&valid_losses).unwrap_or(0);
    let mut model = eng.model;
    model.meta.validation_loss = valid_losses;
    model.truncate_to(m_stop);
    drop_unused_alleles(&mut model);
    let trace = FitTrace {
        initial_train_loss,
        initial_valid_loss,
        iterations,
        batches,
        stop,
        m_stop,
    };
    Ok((model, trace))
}

fn drop_unused_alleles(model: &mut LssModel) {
    let logged: BTreeMap<String, String> = model
        .update_log
        .iter()
        .filter_map(|r| r.variant_id.as_ref())
        .filter_map(|id| model.alleles.get(id).map(|a| (id.clone(), a.clone())))
        .collect();
    model.alleles = logged;
}
