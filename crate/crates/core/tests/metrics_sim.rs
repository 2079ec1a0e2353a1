use std::collections::BTreeSet;

use lssboost::metrics::{r_squared, selection_rates, EvalReport};
use lssboost::sim::{simulate, SimSpec, SplitLabel};
use proptest::prelude::*;

fn report() -> impl Strategy<Value = EvalReport> {
    (
        (any::<f64>(), any::<f64>(), any::<usize>(), any::<usize>(), any::<usize>()),
        (0f64..=1.0, 0f64..=1.0, 0f64..=1.0, 0f64..=1.0, -1f64..=1.0, -1f64..=1.0),
        (0f64..100.0, 0f64..100.0, 0f64..100.0, 0f64..100.0, any::<usize>(), 0f64..1e4),
    )
        .prop_filter("finite", |(a, _, _)| a.0.is_finite() && a.1.is_finite())
        .prop_map(|(a, b, c)| EvalReport {
            r2: a.0,
            test_nll: a.1,
            n_selected_mu: a.2,
            n_selected_sigma: a.3,
            n_shared: a.4,
            tpr_mu: b.0,
            tnr_mu: b.1,
            tpr_sigma: b.2,
            tnr_sigma: b.3,
            sigma_corr: b.4,
            eta_corr: b.5,
            pct_selected_mu_of_p: c.0,
            pct_selected_sigma_of_p: c.1,
            pct_selected_mu_of_truth: c.2,
            pct_selected_sigma_of_truth: c.3,
            m_stop: c.4,
            fit_seconds: c.5,
        })
}

proptest! {
    #[test]
    fn report_json_round_trip(r in report()) {
        let text = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn r_squared_affine_invariant(
        v in proptest::collection::vec((-10f64..10.0, -10f64..10.0), 3..40),
        a in 0.1f64..10.0, b in -5f64..5.0, c in 0.1f64..10.0, d in -5f64..5.0,
    ) {
        let x: Vec<f64> = v.iter().map(|t| t.0).collect();
        let y: Vec<f64> = v.iter().map(|t| t.1).collect();
        if let Ok(r) = r_squared(&x, &y) {
            let tx: Vec<f64> = x.iter().map(|u| a * u + b).collect();
            let ty: Vec<f64> = y.iter().map(|u| c * u + d).collect();
            prop_assert!((r - r_squared(&tx, &ty).unwrap()).abs() < 1e-10);
            prop_assert!((r - r_squared(&y, &x).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn selection_rates_count_integers(p in 2usize..60, sel in proptest::collection::btree_set(0usize..60, 0..30), truth in proptest::collection::btree_set(0usize..60, 1..30)) {
        let sel: BTreeSet<String> = sel.into_iter().filter(|&j| j < p).map(|j| j.to_string()).collect();
        let truth: BTreeSet<String> = truth.into_iter().filter(|&j| j < p).map(|j| j.to_string()).collect();
        prop_assume!(!truth.is_empty());
        let (tpr, tnr) = selection_rates(&sel, &truth, p).unwrap();
        prop_assert!((0.0..=1.0).contains(&tpr) && (0.0..=1.0).contains(&tnr));
        let tp = tpr * truth.len() as f64;
        let tn = tnr * (p - truth.len()) as f64;
        prop_assert!((tp - tp.round()).abs() < 1e-9);
        prop_assert!((tn - tn.round()).abs() < 1e-9);
        prop_assert_eq!(tp.round() as usize, sel.intersection(&truth).count());
    }

    #[test]
    fn split_sizes_within_one(n in 2usize..5000, a in 1u32..20, b in 1u32..20, c in 1u32..20) {
        let t = f64::from(a + b + c);
        let split = [f64::from(a) / t, f64::from(b) / t, 1.0 - f64::from(a) / t - f64::from(b) / t];
        let spec = SimSpec { n, split, ..Default::default() };
        let sizes = spec.split_sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        for k in 0..3 {
            prop_assert!((sizes[k] as f64 - split[k] * n as f64).abs() <= 1.0 + 1e-9);
        }
    }
}

#[test]
fn simulated_truth_contract() {
    for seed in 1..4 {
        let spec = SimSpec { n: 400, p: 200, h2: 0.5, sparsity: 0.05, repeats: 3, seed, ..Default::default() };
        let c = simulate(&spec).unwrap();
        assert_eq!(c.true_beta.len(), 10);
        assert_eq!(c.true_gamma.len(), 10);
        assert!(c.true_gamma.values().all(|g| *g > -0.25 && *g < 0.25));
        assert!(c.sigma_true.iter().all(|s| *s > 0.0));
        let z: Vec<f64> = (0..spec.n).map(|i| (c.baseline_y[i] - c.mu_true[i]) / c.sigma_true[i]).collect();
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let v = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
        let tol = 3.0 / (spec.n as f64).sqrt();
        assert!(m.abs() < tol && (v - 1.0).abs() < 3.0 * tol, "mean {m} var {v}");
        let sizes = spec.split_sizes();
        for (label, want) in [(SplitLabel::Train, sizes[0]), (SplitLabel::Valid, sizes[1]), (SplitLabel::Test, sizes[2])] {
            assert_eq!(c.indices(label).len(), want);
        }
        assert_eq!(simulate(&spec).unwrap().baseline_y, c.baseline_y);
    }
}
