//! Synthetic cohorts with genetically driven mean and variance.
//!
//! Every random quantity is drawn from its own ChaCha stream derived from the
//! single spec seed, so genotypes, coefficients, noise and the split can each
//! be regenerated in isolation.

mod io;

use std::collections::BTreeMap;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

pub use io::{read_cohort, write_cohort};

use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, SampleMeta, VariantMeta};
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenotypeModel {
    /// Independent variants, MAF ~ U(low, high), dosage ~ Binomial(2, MAF).
    MafUniform { low: f64, high: f64 },
    /// Genotypes supplied by the caller through [`simulate_on`].
    FromMatrix,
}

impl Default for GenotypeModel {
    fn default() -> Self {
        GenotypeModel::MafUniform {
            low: 0.05,
            high: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub h2: f64,
    pub sparsity: f64,
    pub repeats: usize,
    /// train, validation, test
    pub split: [f64; 3],
    pub seed: u64,
    pub genotype_model: GenotypeModel,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            n: 4000,
            p: 2000,
            h2: 0.7,
            sparsity: 0.01,
            repeats: 100,
            split: [0.5, 0.2, 0.3],
            seed: 1,
            genotype_model: GenotypeModel::default(),
        }
    }
}

impl SimSpec {
    pub fn n_informative(&self) -> usize {
        (self.sparsity * self.p as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let total: f64 = self.split.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.split.iter().any(|f| !(*f >= 0.0)) {
            return bad(format!("split fractions {:?} must be >= 0 and sum to 1", self.split));
        }
        if !(self.h2 > 0.0 && self.h2 < 1.0) {
            return bad(format!("h2 = {} must lie in (0, 1)", self.h2));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return bad(format!("sparsity = {} must lie in (0, 1]", self.sparsity));
        }
        if self.n_informative() < 1 {
            return bad(format!(
                "sparsity {} x p {} gives no informative variants",
                self.sparsity, self.p
            ));
        }
        if self.repeats < 1 {
            return bad("repeats must be >= 1".into());
        }
        if self.n < 2 {
            return bad("n must be >= 2".into());
        }
        if let GenotypeModel::MafUniform { low, high } = self.genotype_model {
            if !(0.0 <= low && low <= high && high <= 0.5) {
                return bad(format!("MAF range [{low}, {high}] must lie within [0, 0.5]"));
            }
        }
        Ok(())
    }

    pub fn split_sizes(&self) -> [usize; 3] {
        let train = (self.split[0] * self.n as f64).round() as usize;
        let valid = ((self.split[1] * self.n as f64).round() as usize).min(self.n - train);
        [train, valid, self.n - train - valid]
    }
}

/// Expands a base spec over a heritability x sparsity grid.
pub fn grid(base: &SimSpec, h2s: &[f64], sparsities: &[f64]) -> Vec<SimSpec> {
    h2s.iter()
        .flat_map(|&h2| {
            sparsities.iter().map(move |&sparsity| SimSpec {
                h2,
                sparsity,
                ..base.clone()
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Train,
    Valid,
    Test,
}

impl SplitLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::Valid => "valid",
            SplitLabel::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitLabel::Train),
            "valid" | "validation" => Some(SplitLabel::Valid),
            "test" => Some(SplitLabel::Test),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedCohort {
    pub spec: SimSpec,
    pub matrix: GenotypeMatrix,
    /// Per-allele effects on mu (dosage scale).
    pub true_beta: BTreeMap<String, f64>,
    pub true_gamma: BTreeMap<String, f64>,
    pub beta0: f64,
    pub gamma0: f64,
    pub mu_true: Vec<f64>,
    pub sigma_true: Vec<f64>,
    pub baseline_y: Vec<f64>,
    /// Row-major n x repeats; column 0 is the baseline draw.
    pub longitudinal_y: Vec<f64>,
    pub split_assignment: Vec<SplitLabel>,
}

impl SimulatedCohort {
    pub fn repeats(&self) -> usize {
        self.spec.repeats
    }

    pub fn draws(&self, i: usize) -> &[f64] {
        let r = self.spec.repeats;
        &self.longitudinal_y[i * r..(i + 1) * r]
    }

    pub fn indices(&self, label: SplitLabel) -> Vec<usize> {
        (0..self.split_assignment.len())
            .filter(|&i| self.split_assignment[i] == label)
            .collect()
    }

    /// Genotypes and baseline phenotype of one split.
    pub fn part(&self, label: SplitLabel) -> Result<(GenotypeMatrix, Vec<f64>)> {
        let rows = self.indices(label);
        let y = rows.iter().map(|&i| self.baseline_y[i]).collect();
        Ok((self.matrix.subset_samples(&rows)?, y))
    }
}

const STREAM_GENOTYPE: u64 = 1;
const STREAM_SIGMA_SET: u64 = 2;
const STREAM_SIGMA_COEF: u64 = 3;
const STREAM_MU_SET: u64 = 4;
const STREAM_MU_COEF: u64 = 5;
const STREAM_NOISE: u64 = 6;
const STREAM_SPLIT: u64 = 7;

/// Generator for sub-product `purpose`, item `item`.
pub fn stream(seed: u64, purpose: u64, item: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | (item & ((1 << 48) - 1)));
    rng
}

pub fn simulate_genotypes(spec: &SimSpec) -> Result<GenotypeMatrix> {
    let (low, high) = match spec.genotype_model {
        GenotypeModel::MafUniform { low, high } => (low, high),
        GenotypeModel::FromMatrix => {
            return Err(Error::Config(
                "genotype_model from_matrix needs a supplied matrix".into(),
            ))
        }
    };
    let n = spec.n;
    let bpv = n.div_ceil(4);
    let mut packed = vec![0u8; bpv * spec.p];
    for (j, block) in packed.chunks_mut(bpv.max(1)).enumerate().take(spec.p) {
        let mut rng = stream(spec.seed, STREAM_GENOTYPE, j as u64);
        let maf = if high > low { rng.random_range(low..high) } else { low };
        for i in 0..n {
            let d = rng.random_bool(maf) as u8 + rng.random_bool(maf) as u8;
            let code = match d {
                0 => 3u8,
                1 => 2,
                _ => 0,
            };
            block[i / 4] |= code << (2 * (i % 4));
        }
    }
    let variants = (0..spec.p)
        .map(|j| VariantMeta {
            chromosome: "1".into(),
            variant_id: format!("snp{}", j + 1),
            position: (j as u64 + 1) * 1000,
            allele1: "A".into(),
            allele2: "G".into(),
        })
        .collect();
    let samples = (0..n)
        .map(|i| SampleMeta::new(format!("F{}", i + 1), format!("I{}", i + 1)))
        .collect();
    GenotypeMatrix::from_packed(variants, samples, packed)
}

/// Simulates a cohort, drawing genotypes from the spec's genotype model.
pub fn simulate(spec: &SimSpec) -> Result<SimulatedCohort> {
    spec.validate()?;
    let matrix = simulate_genotypes(spec)?;
    build(spec, matrix)
}

/// Simulates phenotypes on supplied genotypes; `spec.n` and `spec.p` are
/// taken from the matrix.
pub fn simulate_on(spec: &SimSpec, matrix: GenotypeMatrix) -> Result<SimulatedCohort> {
    let spec = SimSpec {
        n: matrix.n_samples(),
        p: matrix.n_variants(),
        genotype_model: GenotypeModel::FromMatrix,
        ..spec.clone()
    };
    spec.validate()?;
    build(&spec, matrix)
}

fn choose(spec: &SimSpec, purpose: u64) -> Vec<usize> {
    let mut rng = stream(spec.seed, purpose, 0);
    let mut set = index::sample(&mut rng, spec.p, spec.n_informative()).into_vec();
    set.sort_unstable();
    set
}

/// Draw from U(-0.25, 0.25) that never lands on the boundary.
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = rng.random_range(-0.25..0.25);
        if v != -0.25 {
            return v;
        }
    }
}

fn build(spec: &SimSpec, matrix: GenotypeMatrix) -> Result<SimulatedCohort> {
    let n = matrix.n_samples();
    let k = spec.n_informative();

    let sigma_set = choose(spec, STREAM_SIGMA_SET);
    let mut rng = stream(spec.seed, STREAM_SIGMA_COEF, 0);
    let gamma0 = 0.0;
    let mut eta = vec![gamma0; n];
    let mut true_gamma = BTreeMap::new();
    for &j in &sigma_set {
        let g = open_uniform(&mut rng);
        matrix.add_linear(j, 0.0, g, &mut eta);
        true_gamma.insert(matrix.variants()[j].variant_id.clone(), g);
    }
    let sigma_true: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
    let sigma_bar2 = sigma_true.iter().map(|s| s * s).sum::<f64>() / n as f64;

    // Effects are drawn for standardized genotypes and mapped back to the
    // per-allele scale.
    let mu_set = choose(spec, STREAM_MU_SET);
    let var = sigma_bar2 / (1.0 - spec.h2) * spec.h2 / k as f64;
    let normal = Normal::new(0.0, var.sqrt()).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut rng = stream(spec.seed, STREAM_MU_COEF, 0);
    let mut beta0 = 0.0;
    let mut mu_true = vec![0.0; n];
    let mut true_beta = BTreeMap::new();
    for &j in &mu_set {
        let b: f64 = normal.sample(&mut rng);
        let st = matrix.col_stats(j);
        let (per_allele, shift) = if st.sd > 0.0 {
            (b / st.sd, -b * st.mean / st.sd)
        } else {
            (0.0, 0.0)
        };
        beta0 += shift;
        matrix.add_linear(j, shift, per_allele, &mut mu_true);
        true_beta.insert(matrix.variants()[j].variant_id.clone(), per_allele);
    }

    let r = spec.repeats;
    let mut longitudinal_y = vec![0.0; n * r];
    for i in 0..n {
        let mut rng = stream(spec.seed, STREAM_NOISE, i as u64);
        for slot in &mut longitudinal_y[i * r..(i + 1) * r] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *slot = mu_true[i] + sigma_true[i] * z;
        }
    }
    let baseline_y = (0..n).map(|i| longitudinal_y[i * r]).collect();

    let split_assignment = assign_split(spec, n);
    Ok(SimulatedCohort {
        spec: spec.clone(),
        matrix,
        true_beta,
        true_gamma,
        beta0,
        gamma0,
        mu_true,
        sigma_true,
        baseline_y,
        longitudinal_y,
        split_assignment,
    })
}

fn assign_split(spec: &SimSpec, n: usize) -> Vec<SplitLabel> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(spec.seed, STREAM_SPLIT, 0));
    let [train, valid, _] = SimSpec { n, ..spec.clone() }.split_sizes();
    let mut labels = vec![SplitLabel::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < train {
            labels[i] = SplitLabel::Train;
        } else if rank < train + valid {
            labels[i] = SplitLabel::Valid;
        }
    }
    labels
}

/// Var(mu) / (Var(mu) + mean(sigma^2)) over the whole cohort.
pub fn realized_heritability(mu_true: &[f64], sigma_true: &[f64]) -> f64 {
    let v = stats::sample_var(mu_true);
    let s2 = sigma_true.iter().map(|s| s * s).sum::<f64>() / sigma_true.len() as f64;
    if v > 0.0 {
        v / (v + s2)
    } else {
        0.0
    }
}

/// Per-individual sample SD over the first `k` repeated draws.
pub fn benchmark_sigma_sd(cohort: &SimulatedCohort, k: usize) -> Result<Vec<f64>> {
    if k < 2 || k > cohort.repeats() {
        return Err(Error::Config(format!(
            "k = {k} must lie in [2, {}]",
            cohort.repeats()
        )));
    }
    Ok((0..cohort.mu_true.len())
        .map(|i| stats::sample_sd(&cohort.draws(i)[..k]))
        .collect())
}
