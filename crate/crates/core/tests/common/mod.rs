//! Reference implementations shared by the integration tests. They work on
//! plain `f64` vectors and never touch the packed representation.
#![allow(dead_code)]

use lssboost::{GenotypeMatrix, SampleMeta, VariantMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn matrix(columns: &[Vec<Option<u8>>]) -> GenotypeMatrix {
    let n = columns.first().map_or(0, Vec::len);
    let variants = (0..columns.len())
        .map(|j| VariantMeta::synthetic(format!("v{j}"), j as u64 + 1))
        .collect();
    let samples = (0..n).map(|i| SampleMeta::new(format!("f{i}"), format!("s{i}"))).collect();
    GenotypeMatrix::from_dosages(variants, samples, columns).unwrap()
}

pub fn random_columns(rng: &mut ChaCha8Rng, n: usize, p: usize, missing: f64) -> Vec<Vec<Option<u8>>> {
    (0..p)
        .map(|_| {
            let maf: f64 = rng.random_range(0.05..0.5);
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < missing {
                        None
                    } else {
                        Some(u8::from(rng.random::<f64>() < maf) + u8::from(rng.random::<f64>() < maf))
                    }
                })
                .collect()
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean-imputed column as floats.
pub fn imputed(col: &[Option<u8>]) -> Vec<f64> {
    let obs: Vec<f64> = col.iter().flatten().map(|&d| d as f64).collect();
    let m = if obs.is_empty() { 0.0 } else { obs.iter().sum::<f64>() / obs.len() as f64 };
    col.iter().map(|d| d.map_or(m, |d| d as f64)).collect()
}

/// Two-pass Pearson correlation; 0 when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

pub fn nll(y: f64, mu: f64, eta: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI).ln() + eta + (y - mu).powi(2) / (2.0 * (2.0 * eta).exp())
}

pub fn mean_nll(y: &[f64], mu: &[f64], eta: &[f64]) -> f64 {
    (0..y.len()).map(|i| nll(y[i], mu[i], eta[i])).sum::<f64>() / y.len() as f64
}
