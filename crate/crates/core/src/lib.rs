//! Sparse polygenic models for the mean and the log standard deviation of a
//! quantitative phenotype, fitted by batch-wise cyclical component-wise
//! gradient boosting on 2-bit packed genotype matrices.
//!
//! The crate also carries a cohort simulator, evaluation metrics and a
//! gene-by-environment analysis toolkit (interaction regressions, subgroup
//! comparisons and an inverse-probability-weighted treatment pipeline).

pub mod boost;
pub mod error;
pub mod genotype;
pub mod gxe;
pub mod metrics;
pub mod model;
pub mod par;
pub mod sim;
pub mod stats;
pub mod table;

pub use boost::{fit, fit_with, BoostConfig, DataView, FitTrace, StepMode};
pub use error::{Error, Result};
pub use genotype::{GenotypeMatrix, Imputation, SampleMeta, VariantMeta};
pub use model::{predict, score, standardize, LssModel, Parameter, Prediction};
pub use par::Execution;
