//! Genotype storage: a 2-bit packed, variant-major dosage matrix.
//!
//! Codes follow the PLINK-1 convention. Within a byte the first sample sits in
//! the lowest bit pair; a pair value of 0 is two copies of allele 1, 1 is
//! missing, 2 is heterozygous and 3 is zero copies of allele 1.

mod plink;
mod text;

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub use plink::{load_plink, write_plink};
pub use text::{load_text_matrix, write_text_matrix, write_text_matrix_with_comment};

pub const CODE_HOM_A1: u8 = 0;
pub const CODE_MISSING: u8 = 1;
pub const CODE_HET: u8 = 2;
pub const CODE_HOM_A2: u8 = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantMeta {
    pub chromosome: String,
    pub variant_id: String,
    pub position: u64,
    pub allele1: String,
    pub allele2: String,
}

impl VariantMeta {
    /// Placeholder metadata for synthetic data.
    pub fn synthetic(variant_id: impl Into<String>, position: u64) -> Self {
        VariantMeta {
            chromosome: "1".into(),
            variant_id: variant_id.into(),
            position,
            allele1: "A".into(),
            allele2: "G".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleMeta {
    pub family_id: String,
    pub individual_id: String,
}

impl SampleMeta {
    pub fn new(family_id: impl Into<String>, individual_id: impl Into<String>) -> Self {
        SampleMeta {
            family_id: family_id.into(),
            individual_id: individual_id.into(),
        }
    }
}

/// Per-variant moments. `mean` is over non-missing entries; `sd` is the sample
/// SD of the mean-imputed column (identical to the plain sample SD when nothing
/// is missing).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
    pub missing: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Imputation {
    /// Missing entries come back as NaN.
    None,
    #[default]
    Mean,
}

const fn code_dosage(code: u8) -> f64 {
    match code {
        CODE_HOM_A1 => 2.0,
        CODE_HET => 1.0,
        _ => 0.0,
    }
}

const fn build_dosage_lut() -> [[f64; 4]; 256] {
    let mut lut = [[0.0; 4]; 256];
    let mut b = 0;
    while b < 256 {
        let mut k = 0;
        while k < 4 {
            lut[b][k] = code_dosage(((b >> (2 * k)) & 3) as u8);
            k += 1;
        }
        b += 1;
    }
    lut
}

const fn build_missing_lut() -> [[f64; 4]; 256] {
    let mut lut = [[0.0; 4]; 256];
    let mut b = 0;
    while b < 256 {
        let mut k = 0;
        while k < 4 {
            if ((b >> (2 * k)) & 3) as u8 == CODE_MISSING {
                lut[b][k] = 1.0;
            }
            k += 1;
        }
        b += 1;
    }
    lut
}

static DOSAGE_LUT: [[f64; 4]; 256] = build_dosage_lut();
static MISSING_LUT: [[f64; 4]; 256] = build_missing_lut();

/// Below this many columns a scan uses plain dot products.
const BLOCK_TABLE_MIN_COLUMNS: usize = 64;

/// Dot products of every possible byte with each 4-sample block of a vector,
/// so a column without missing calls costs one lookup per byte.
pub(crate) struct BlockTable {
    sums: Vec<[f64; 256]>,
}

impl BlockTable {
    pub(crate) fn new(v: &[f64]) -> Self {
        let sums = v
            .chunks(4)
            .map(|c| {
                let mut w = [0.0; 4];
                w[..c.len()].copy_from_slice(c);
                let mut lo = [0.0; 16];
                let mut hi = [0.0; 16];
                for nib in 0..16u8 {
                    lo[nib as usize] = code_dosage(nib & 3) * w[0] + code_dosage(nib >> 2) * w[1];
                    hi[nib as usize] = code_dosage(nib & 3) * w[2] + code_dosage(nib >> 2) * w[3];
                }
                let mut t = [0.0; 256];
                for (b, slot) in t.iter_mut().enumerate() {
                    *slot = lo[b & 15] + hi[b >> 4];
                }
                t
            })
            .collect();
        BlockTable { sums }
    }

    /// Dot product with a packed column that has no missing calls.
    pub(crate) fn dot(&self, codes: &[u8]) -> f64 {
        let mut acc = [0.0f64; 4];
        let mut chunks = codes.chunks_exact(4);
        let mut blocks = self.sums.chunks_exact(4);
        for (c, t) in (&mut chunks).zip(&mut blocks) {
            for k in 0..4 {
                acc[k] += t[k][c[k] as usize];
            }
        }
        let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        for (c, t) in chunks.remainder().iter().zip(blocks.remainder()) {
            sum += t[*c as usize];
        }
        sum
    }
}

#[inline]
pub(crate) fn code_at(bytes: &[u8], i: usize) -> u8 {
    (bytes[i / 4] >> (2 * (i % 4))) & 3
}

pub(crate) fn bytes_per_variant(n: usize) -> usize {
    n.div_ceil(4)
}

/// Zeroes the unused bit pairs in the last byte of a variant block.
pub(crate) fn mask_padding(block: &mut [u8], n: usize) {
    let rem = n % 4;
    if rem != 0 {
        if let Some(last) = block.last_mut() {
            *last &= (1u8 << (2 * rem)) - 1;
        }
    }
}

/// A residual or phenotype vector centred once so that many column
/// correlations and simple regressions can reuse it.
#[derive(Clone, Debug)]
pub struct CenteredTarget {
    centered: Vec<f64>,
    mean: f64,
    sd: f64,
}

impl CenteredTarget {
    pub fn new(target: &[f64]) -> Result<Self> {
        let n = target.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "correlation needs at least 2 samples, got {n}"
            )));
        }
        let mean = target.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = target.iter().map(|v| v - mean).collect();
        let ss: f64 = centered.iter().map(|v| v * v).sum();
        if !ss.is_finite() || !mean.is_finite() {
            return Err(Error::Numeric("non-finite target vector".into()));
        }
        Ok(CenteredTarget {
            centered,
            mean,
            sd: (ss / (n - 1) as f64).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }
}

/// n x p dosage matrix in 2-bit packed, variant-major layout.
#[derive(Clone, Debug)]
pub struct GenotypeMatrix {
    n: usize,
    packed: Vec<u8>,
    variants: Vec<VariantMeta>,
    samples: Vec<SampleMeta>,
    stats: OnceLock<Vec<ColumnStats>>,
    index: OnceLock<HashMap<String, usize>>,
}

impl PartialEq for GenotypeMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.packed == other.packed
            && self.variants == other.variants
            && self.samples == other.samples
    }
}

impl GenotypeMatrix {
    /// Builds a matrix from variant-major packed codes.
    pub fn from_packed(
        variants: Vec<VariantMeta>,
        samples: Vec<SampleMeta>,
        mut packed: Vec<u8>,
    ) -> Result<Self> {
        let n = samples.len();
        let bpv = bytes_per_variant(n);
        if packed.len() != bpv * variants.len() {
            return Err(Error::Integrity(format!(
                "packed length {} != {} bytes x {} variants",
                packed.len(),
                bpv,
                variants.len()
            )));
        }
        validate_metadata(&variants, &samples)?;
        if bpv > 0 {
            for block in packed.chunks_mut(bpv) {
                mask_padding(block, n);
            }
        }
        Ok(GenotypeMatrix {
            n,
            packed,
            variants,
            samples,
            stats: OnceLock::new(),
            index: OnceLock::new(),
        })
    }

    /// Builds a matrix from per-variant columns of dosages (`None` = missing).
    pub fn from_dosages(
        variants: Vec<VariantMeta>,
        samples: Vec<SampleMeta>,
        columns: &[Vec<Option<u8>>],
    ) -> Result<Self> {
        let n = samples.len();
        if columns.len() != variants.len() {
            return Err(Error::Integrity(format!(
                "{} columns for {} variants",
                columns.len(),
                variants.len()
            )));
        }
        let bpv = bytes_per_variant(n);
        let mut packed = vec![0u8; bpv * columns.len()];
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Integrity(format!(
                    "column {} has {} entries, expected {n}",
                    variants[j].variant_id,
                    col.len()
                )));
            }
            let block = &mut packed[j * bpv..(j + 1) * bpv];
            for (i, d) in col.iter().enumerate() {
                let code = match d {
                    None => CODE_MISSING,
                    Some(0) => CODE_HOM_A2,
                    Some(1) => CODE_HET,
                    Some(2) => CODE_HOM_A1,
                    Some(v) => {
                        return Err(Error::Validation(format!(
                            "dosage {v} out of range for variant {}",
                            variants[j].variant_id
                        )))
                    }
                };
                block[i / 4] |= code << (2 * (i % 4));
            }
        }
        Self::from_packed(variants, samples, packed)
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_variants(&self) -> usize {
        self.variants.len()
    }

    pub fn variants(&self) -> &[VariantMeta] {
        &self.variants
    }

    pub fn samples(&self) -> &[SampleMeta] {
        &self.samples
    }

    pub fn packed(&self) -> &[u8] {
        &self.packed
    }

    /// Packed bytes of variant `j`.
    pub fn codes(&self, j: usize) -> &[u8] {
        let bpv = bytes_per_variant(self.n);
        &self.packed[j * bpv..(j + 1) * bpv]
    }

    pub fn variant_index(&self, id: &str) -> Option<usize> {
        self.index
            .get_or_init(|| {
                self.variants
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (v.variant_id.clone(), j))
                    .collect()
            })
            .get(id)
            .copied()
    }

    pub fn raw_column(&self, j: usize) -> Vec<Option<u8>> {
        let codes = self.codes(j);
        (0..self.n)
            .map(|i| match code_at(codes, i) {
                CODE_MISSING => None,
                c => Some(code_dosage(c) as u8),
            })
            .collect()
    }

    pub fn dosage_column(&self, j: usize, imputation: Imputation) -> Result<Vec<f64>> {
        if j >= self.n_variants() {
            return Err(Error::Validation(format!(
                "variant index {j} out of range (p = {})",
                self.n_variants()
            )));
        }
        let fill = match imputation {
            Imputation::None => f64::NAN,
            Imputation::Mean => {
                let st = self.col_stats(j);
                if st.missing == self.n && self.n > 0 {
                    return Err(Error::Degenerate(format!(
                        "variant {} is missing in every sample",
                        self.variants[j].variant_id
                    )));
                }
                st.mean
            }
        };
        let codes = self.codes(j);
        Ok((0..self.n)
            .map(|i| match code_at(codes, i) {
                CODE_MISSING => fill,
                c => code_dosage(c),
            })
            .collect())
    }

    pub fn column_stats(&self) -> &[ColumnStats] {
        self.stats.get_or_init(|| {
            par::map_indices(Execution::default(), self.n_variants(), |j| {
                compute_stats(self.codes(j), self.n)
            })
        })
    }

    pub fn col_stats(&self, j: usize) -> ColumnStats {
        self.column_stats()[j]
    }

    /// Dot product of the mean-imputed column `j` with `v`.
    pub fn dot(&self, j: usize, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n);
        let codes = self.codes(j);
        let st = self.col_stats(j);
        let full = self.n / 4;
        let mut acc = [0.0f64; 4];
        let mut miss = [0.0f64; 4];
        let track_missing = st.missing > 0;
        for (b, chunk) in codes[..full].iter().zip(v.chunks_exact(4)) {
            let d = &DOSAGE_LUT[*b as usize];
            for k in 0..4 {
                acc[k] += d[k] * chunk[k];
            }
            if track_missing {
                let m = &MISSING_LUT[*b as usize];
                for k in 0..4 {
                    miss[k] += m[k] * chunk[k];
                }
            }
        }
        let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        let mut miss_sum = (miss[0] + miss[1]) + (miss[2] + miss[3]);
        for i in full * 4..self.n {
            match code_at(codes, i) {
                CODE_MISSING => miss_sum += v[i],
                c => sum += code_dosage(c) * v[i],
            }
        }
        if track_missing {
            sum += st.mean * miss_sum;
        }
        sum
    }

    /// `out[i] += a + b * g_ij` with the mean-imputed column `j`.
    pub fn add_linear(&self, j: usize, a: f64, b: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        self.add_linear_range(j, a, b, 0, out);
    }

    /// Same as [`add_linear`](Self::add_linear) on samples `start..start + out.len()`.
    pub fn add_linear_range(&self, j: usize, a: f64, b: f64, start: usize, out: &mut [f64]) {
        debug_assert!(start + out.len() <= self.n);
        let codes = self.codes(j);
        let fill = a + b * self.col_stats(j).mean;
        let table = [a + 2.0 * b, fill, a + b, a];
        for (k, o) in out.iter_mut().enumerate() {
            *o += table[code_at(codes, start + k) as usize];
        }
    }

    /// Pearson correlation of the mean-imputed column `j` with `target`.
    /// Zero-variance columns or targets give exactly 0.
    pub fn column_correlation(&self, j: usize, target: &[f64]) -> Result<f64> {
        self.check_target(target)?;
        let ct = CenteredTarget::new(target)?;
        Ok(self.correlation_with(j, &ct))
    }

    pub fn correlation_with(&self, j: usize, target: &CenteredTarget) -> f64 {
        let st = self.col_stats(j);
        if !(st.sd > 0.0) || !(target.sd > 0.0) {
            return 0.0;
        }
        let cov = self.dot(j, &target.centered) / (self.n - 1) as f64;
        (cov / (st.sd * target.sd)).clamp(-1.0, 1.0)
    }

    /// Correlations of the listed columns with `target`, in the given order.
    pub fn correlations(
        &self,
        indices: &[usize],
        target: &CenteredTarget,
        exec: Execution,
    ) -> Vec<f64> {
        self.column_stats();
        if indices.len() < BLOCK_TABLE_MIN_COLUMNS {
            return par::map_indices(exec, indices.len(), |k| {
                self.correlation_with(indices[k], target)
            });
        }
        let table = BlockTable::new(&target.centered);
        par::map_indices(exec, indices.len(), |k| {
            self.correlation_from(indices[k], target, &table)
        })
    }

    /// Correlations of every column with `target`.
    pub fn all_correlations(&self, target: &CenteredTarget, exec: Execution) -> Vec<f64> {
        let all: Vec<usize> = (0..self.n_variants()).collect();
        self.correlations(&all, target, exec)
    }

    fn correlation_from(&self, j: usize, target: &CenteredTarget, table: &BlockTable) -> f64 {
        let st = self.col_stats(j);
        if st.missing > 0 {
            return self.correlation_with(j, target);
        }
        if !(st.sd > 0.0) || !(target.sd > 0.0) {
            return 0.0;
        }
        let cov = table.dot(self.codes(j)) / (self.n - 1) as f64;
        (cov / (st.sd * target.sd)).clamp(-1.0, 1.0)
    }

    /// Least-squares fit `target ~ b0 + b1 * g_j` on the mean-imputed column.
    /// A constant column yields slope 0 and the target mean as intercept.
    pub fn simple_regression(&self, j: usize, target: &CenteredTarget) -> (f64, f64) {
        let st = self.col_stats(j);
        if !(st.sd > 0.0) {
            return (target.mean, 0.0);
        }
        let sxy = self.dot(j, &target.centered);
        let sxx = st.sd * st.sd * (self.n - 1) as f64;
        let slope = sxy / sxx;
        (target.mean - slope * st.mean, slope)
    }

    pub(crate) fn check_target(&self, target: &[f64]) -> Result<()> {
        if target.len() != self.n {
            return Err(Error::Validation(format!(
                "target length {} != sample count {}",
                target.len(),
                self.n
            )));
        }
        if self.n < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 samples, got {}",
                self.n
            )));
        }
        Ok(())
    }

    /// New matrix restricted to the given samples, in the given order.
    pub fn subset_samples(&self, rows: &[usize]) -> Result<GenotypeMatrix> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n) {
            return Err(Error::Validation(format!("sample index {bad} out of range")));
        }
        let m = rows.len();
        let bpv = bytes_per_variant(m);
        let mut packed = vec![0u8; bpv * self.n_variants()];
        for j in 0..self.n_variants() {
            let src = self.codes(j);
            let dst = &mut packed[j * bpv..(j + 1) * bpv];
            for (k, &r) in rows.iter().enumerate() {
                dst[k / 4] |= code_at(src, r) << (2 * (k % 4));
            }
        }
        let samples = rows.iter().map(|&r| self.samples[r].clone()).collect();
        GenotypeMatrix::from_packed(self.variants.clone(), samples, packed)
    }

    /// New matrix restricted to the given variants, in the given order.
    pub fn subset_variants(&self, cols: &[usize]) -> Result<GenotypeMatrix> {
        let mut packed = Vec::with_capacity(cols.len() * bytes_per_variant(self.n));
        let mut variants = Vec::with_capacity(cols.len());
        for &j in cols {
            if j >= self.n_variants() {
                return Err(Error::Validation(format!("variant index {j} out of range")));
            }
            packed.extend_from_slice(self.codes(j));
            variants.push(self.variants[j].clone());
        }
        GenotypeMatrix::from_packed(variants, self.samples.clone(), packed)
    }

    /// Keeps variants with call rate >= `min_call_rate` and minor allele
    /// frequency >= `min_maf`. Not applied by any loader.
    pub fn filter_variants(&self, min_call_rate: f64, min_maf: f64) -> Result<GenotypeMatrix> {
        let keep: Vec<usize> = (0..self.n_variants())
            .filter(|&j| {
                let st = self.col_stats(j);
                let call_rate = 1.0 - st.missing as f64 / self.n.max(1) as f64;
                let af = st.mean / 2.0;
                let maf = af.min(1.0 - af);
                call_rate >= min_call_rate && maf.is_finite() && maf >= min_maf
            })
            .collect();
        self.subset_variants(&keep)
    }
}

fn compute_stats(codes: &[u8], n: usize) -> ColumnStats {
    let mut counts = [0usize; 4];
    for i in 0..n {
        counts[code_at(codes, i) as usize] += 1;
    }
    let missing = counts[CODE_MISSING as usize];
    let called = n - missing;
    if called == 0 {
        // Imputes to a constant column, which is never selected.
        return ColumnStats {
            mean: 0.0,
            sd: 0.0,
            missing,
        };
    }
    let sum = 2.0 * counts[CODE_HOM_A1 as usize] as f64 + counts[CODE_HET as usize] as f64;
    let mean = sum / called as f64;
    let ss = counts[CODE_HOM_A1 as usize] as f64 * (2.0 - mean).powi(2)
        + counts[CODE_HET as usize] as f64 * (1.0 - mean).powi(2)
        + counts[CODE_HOM_A2 as usize] as f64 * mean * mean;
    let sd = if n > 1 {
        (ss / (n - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    ColumnStats { mean, sd, missing }
}

fn validate_metadata(variants: &[VariantMeta], samples: &[SampleMeta]) -> Result<()> {
    let mut seen = HashSet::with_capacity(variants.len());
    for v in variants {
        if v.variant_id.is_empty() {
            return Err(Error::Integrity("empty variant id".into()));
        }
        if !seen.insert(v.variant_id.as_str()) {
            return Err(Error::Integrity(format!(
                "duplicate variant id {}",
                v.variant_id
            )));
        }
    }
    let mut seen = HashSet::with_capacity(samples.len());
    for s in samples {
        if !seen.insert((s.family_id.as_str(), s.individual_id.as_str())) {
            return Err(Error::Integrity(format!(
                "duplicate sample {} {}",
                s.family_id, s.individual_id
            )));
        }
    }
    Ok(())
}
