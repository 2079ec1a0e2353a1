mod common;

use common::{imputed, matrix, pearson, random_columns, rng};
use lssboost::genotype::{load_plink, load_text_matrix, write_plink, write_text_matrix, CenteredTarget};
use lssboost::{Execution, Imputation};
use proptest::prelude::*;

fn column_strategy(n: usize) -> impl Strategy<Value = Vec<Option<u8>>> {
    proptest::collection::vec(prop_oneof![4 => (0u8..=2).prop_map(Some), 1 => Just(None)], n)
}

fn columns_strategy() -> impl Strategy<Value = Vec<Vec<Option<u8>>>> {
    (1usize..23, 1usize..6).prop_flat_map(|(n, p)| proptest::collection::vec(column_strategy(n), p))
}

proptest! {
    #[test]
    fn text_round_trip(cols in columns_strategy()) {
        let g = matrix(&cols);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.tsv");
        write_text_matrix(&g, &path).unwrap();
        let back = load_text_matrix(&path).unwrap();
        prop_assert_eq!(&back, &g);
        for (j, c) in cols.iter().enumerate() {
            prop_assert_eq!(&back.raw_column(j), c);
        }
    }

    #[test]
    fn bed_decode_pack_decode(n in 1usize..30, p in 1usize..5, bytes in proptest::collection::vec(any::<u8>(), 240)) {
        let bpv = n.div_ceil(4);
        let cols = random_columns(&mut rng(n as u64), n, p, 0.0);
        let template = matrix(&cols);
        let dir = tempfile::tempdir().unwrap();
        let (bed, bim, fam) = (dir.path().join("a.bed"), dir.path().join("a.bim"), dir.path().join("a.fam"));
        write_plink(&template, &bed, &bim, &fam).unwrap();
        let mut raw = vec![0x6c, 0x1b, 0x01];
        raw.extend_from_slice(&bytes[..bpv * p]);
        std::fs::write(&bed, &raw).unwrap();
        let first = load_plink(&bed, &bim, &fam).unwrap();
        for j in 0..p {
            prop_assert_eq!(first.raw_column(j), decode_reference(&bytes[j * bpv..(j + 1) * bpv], n));
        }
        let dir2 = tempfile::tempdir().unwrap();
        let (bed2, bim2, fam2) = (dir2.path().join("b.bed"), dir2.path().join("b.bim"), dir2.path().join("b.fam"));
        write_plink(&first, &bed2, &bim2, &fam2).unwrap();
        let second = load_plink(&bed2, &bim2, &fam2).unwrap();
        for j in 0..p {
            prop_assert_eq!(second.raw_column(j), first.raw_column(j));
        }
    }

    #[test]
    fn correlation_affine_invariant(cols in columns_strategy(), a in 0.01f64..100.0, b in -50f64..50.0, seed in any::<u64>()) {
        let g = matrix(&cols);
        prop_assume!(g.n_samples() >= 2);
        let mut r = rng(seed);
        let y: Vec<f64> = (0..g.n_samples()).map(|_| rand::Rng::random::<f64>(&mut r) - 0.5).collect();
        let ty: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        for j in 0..g.n_variants() {
            let c1 = g.column_correlation(j, &y).unwrap();
            let c2 = g.column_correlation(j, &ty).unwrap();
            prop_assert!((c1 - c2).abs() <= 1e-12, "{} vs {}", c1, c2);
        }
    }

    #[test]
    fn col_stats_mean_matches_observed(cols in columns_strategy()) {
        let g = matrix(&cols);
        for (j, c) in cols.iter().enumerate() {
            let raw = g.dosage_column(j, Imputation::None).unwrap();
            let obs: Vec<f64> = raw.iter().copied().filter(|v| !v.is_nan()).collect();
            let st = g.col_stats(j);
            prop_assert_eq!(st.missing, c.iter().filter(|d| d.is_none()).count());
            prop_assert!((0.0..=2.0).contains(&st.mean));
            if !obs.is_empty() {
                let m = obs.iter().sum::<f64>() / obs.len() as f64;
                prop_assert!((st.mean - m).abs() <= 1e-12);
            }
            match g.dosage_column(j, Imputation::Mean) {
                Ok(imp) => prop_assert!(imp.iter().all(|v| v.is_finite())),
                Err(_) => prop_assert!(obs.is_empty()),
            }
        }
    }
}

/// Bit-level reading of a variant block, independent of the crate's decoder.
fn decode_reference(block: &[u8], n: usize) -> Vec<Option<u8>> {
    (0..n)
        .map(|i| match (block[i / 4] >> (2 * (i % 4))) & 0b11 {
            0b00 => Some(2),
            0b01 => None,
            0b10 => Some(1),
            _ => Some(0),
        })
        .collect()
}

#[test]
fn correlations_match_reference_on_wide_matrix() {
    // Wide enough for the table-driven scan, with and without missing calls.
    let mut r = rng(11);
    for (n, missing) in [(203, 0.0), (97, 0.03), (5, 0.0)] {
        let cols = random_columns(&mut r, n, 150, missing);
        let g = matrix(&cols);
        let y: Vec<f64> = (0..n).map(|i| ((i * 37 % 101) as f64).sin() * 3.0 + 1.0).collect();
        let t = CenteredTarget::new(&y).unwrap();
        let seq = g.all_correlations(&t, Execution::Sequential);
        let par = g.all_correlations(&t, Execution::Parallel);
        assert_eq!(seq, par);
        let idx: Vec<usize> = (0..150).rev().step_by(3).collect();
        let sub = g.correlations(&idx, &t, Execution::Parallel);
        for (k, &j) in idx.iter().enumerate() {
            // Short index lists take the direct path; agreement is to rounding.
            assert!((sub[k] - seq[j]).abs() < 1e-14);
        }
        for (j, c) in cols.iter().enumerate() {
            let want = pearson(&imputed(c), &y);
            assert!((seq[j] - want).abs() < 1e-12, "n={n} j={j}: {} vs {want}", seq[j]);
            assert!((g.correlation_with(j, &t) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn constant_column_has_zero_correlation() {
    let g = matrix(&[vec![Some(1); 70], (0..70).map(|i| Some((i % 3) as u8)).collect()]);
    let y: Vec<f64> = (0..70).map(|i| i as f64).collect();
    assert_eq!(g.column_correlation(0, &y).unwrap(), 0.0);
    assert!(g.column_correlation(1, &y).unwrap() != 0.0);
}

#[test]
fn simple_regression_matches_least_squares() {
    let cols = random_columns(&mut rng(3), 60, 4, 0.05);
    let g = matrix(&cols);
    let y: Vec<f64> = (0..60).map(|i| (i as f64 * 0.3).cos()).collect();
    let t = CenteredTarget::new(&y).unwrap();
    for (j, c) in cols.iter().enumerate() {
        let x = imputed(c);
        let mx = x.iter().sum::<f64>() / 60.0;
        let my = y.iter().sum::<f64>() / 60.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let (b0, b1) = g.simple_regression(j, &t);
        assert!((b1 - sxy / sxx).abs() < 1e-12);
        assert!((b0 - (my - sxy / sxx * mx)).abs() < 1e-12);
    }
}
