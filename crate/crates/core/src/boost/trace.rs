use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Parameter;

/// What happened to one sub-model within a boosting iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum StepOutcome {
    Updated {
        variant_index: usize,
        variant_id: String,
        correlation: f64,
        step_length: f64,
    },
    /// The within-batch best fell below the batch's c_stop; flag set now.
    EarlyStopped { best_correlation: f64 },
    /// Flag was already set earlier in this batch.
    Skipped,
    /// Sub-model switched off by configuration.
    Disabled,
}

impl StepOutcome {
    pub fn variant_id(&self) -> Option<&str> {
        match self {
            StepOutcome::Updated { variant_id, .. } => Some(variant_id),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub batch: usize,
    pub mu: StepOutcome,
    pub sigma: StepOutcome,
    /// Training loss after the mu sub-update of this iteration.
    pub train_loss_after_mu: f64,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchEnd {
    BothStopped,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub k: usize,
    pub first_iteration: usize,
    pub last_iteration: usize,
    pub mu_c_stop: f64,
    pub mu_top_correlation: f64,
    pub sigma_c_stop: Option<f64>,
    pub sigma_top_correlation: Option<f64>,
    pub best_valid_loss: f64,
    pub end: BatchEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterStop {
    MaxBatches,
    NoImprovement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub initial_train_loss: f64,
    pub initial_valid_loss: f64,
    pub iterations: Vec<IterationRecord>,
    pub batches: Vec<BatchRecord>,
    pub stop: OuterStop,
    pub m_stop: usize,
}

impl FitTrace {
    pub fn valid_losses(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.valid_loss).collect()
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations.len()
    }

    /// Writes one row per (iteration, parameter).
    pub fn write_tsv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        if let Some(c) = comment {
            writeln!(w, "# {c}").map_err(io)?;
        }
        writeln!(w, "iteration\tparameter\tvariant\ttrain_loss\tvalid_loss").map_err(io)?;
        for r in &self.iterations {
            for (p, o) in [(Parameter::Mu, &r.mu), (Parameter::Sigma, &r.sigma)] {
                let v = match o {
                    StepOutcome::Updated { variant_id, .. } => variant_id.as_str(),
                    StepOutcome::EarlyStopped { .. } => "(stopped)",
                    StepOutcome::Skipped => "(skipped)",
                    StepOutcome::Disabled => "(disabled)",
                };
                writeln!(
                    w,
                    "{}\t{p}\t{v}\t{:?}\t{:?}",
                    r.iteration, r.train_loss, r.valid_loss
                )
                .map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// 1-based iteration with the lowest validation loss; ties go to the earliest.
/// Non-finite losses never win.
pub fn select_m_stop(valid_losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &l) in valid_losses.iter().enumerate() {
        if !l.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, b)| l < b) {
            best = Some((k + 1, l));
        }
    }
    best.map(|(m, _)| m)
        .or(if valid_losses.is_empty() { None } else { Some(1) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn earliest_minimum() {
        assert_eq!(select_m_stop(&[3.0, 2.0, 2.0, 4.0]), Some(2));
        assert_eq!(select_m_stop(&[5.0, 4.0, 3.0, 2.0]), Some(4));
        assert_eq!(select_m_stop(&[1.0]), Some(1));
        assert_eq!(select_m_stop(&[]), None);
        assert_eq!(select_m_stop(&[f64::NAN, 2.0]), Some(2));
    }
}
