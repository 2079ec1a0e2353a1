//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,2,8` runs a subset; `ACCEPTANCE_STRICT=1` turns any FAIL
//! into a nonzero exit status.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use common::{imputed, matrix, pearson, random_columns, rng};
use lssboost::boost::{adaptive_step_mu, batch_from_correlations, best_in_batch, build_batch};
use lssboost::genotype::{load_plink, load_text_matrix, write_text_matrix, CenteredTarget};
use lssboost::gxe::calibration::{
    iptw_estimates, null_interaction_pvalues, planted_interaction_estimates, rejection_rate, subgroup_pvalues,
    TrialSpec,
};
use lssboost::gxe::{logistic_propensity, two_sample_ttest, DesignMatrix, TTestKind};
use lssboost::metrics::{evaluate, EvalReport};
use lssboost::model::{nll_loss, residual_mu, residual_sigma, Parameter, Prediction};
use lssboost::sim::{benchmark_sigma_sd, simulate, SimSpec, SplitLabel};
use lssboost::{fit, BoostConfig, DataView, Execution, StepMode};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// Tolerances and sizes.
const GRAD_TRIPLES: usize = 1000;
const GRAD_REL_TOL: f64 = 1e-6;
const SCREEN_INSTANCES: usize = 100;
const GRID_N: usize = 4000;
const GRID_P: usize = 2000;
const GRID_SEEDS: u64 = 20;
const GRID_REPEATS: usize = 10;
const GRID_H2: [f64; 2] = [0.7, 0.1];
const GRID_S: [f64; 2] = [0.01, 0.001];
const FIXED_NU: f64 = 0.1;
const NULL_REPS: usize = 1000;
const NULL_N: usize = 1000;
const PLANTED: f64 = -0.088;
const PLANTED_N: usize = 5000;
const PLANTED_REPS: usize = 100;
const IPTW_REPS: usize = 200;
const SUBGROUP_REPS: usize = 200;
const SUBGROUP_N: usize = 1200;

fn normal(r: &mut impl Rng) -> f64 {
    StandardNormal.sample(r)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn c1_gradient() -> Outcome {
    let t = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    let h = 1e-5;
    for _ in 0..GRAD_TRIPLES {
        let y = 10.0 * (r.random::<f64>() - 0.5);
        let mu = 10.0 * (r.random::<f64>() - 0.5);
        let eta = 4.0 * (r.random::<f64>() - 0.5);
        let loss = |m: f64, e: f64| nll_loss(&[y], &Prediction::from_predictors(vec![m], vec![e])).unwrap();
        let pred = Prediction::from_predictors(vec![mu], vec![eta]);
        let gm = -residual_mu(&[y], &pred).unwrap()[0];
        let gs = -residual_sigma(&[y], &pred).unwrap()[0];
        let fm = (loss(mu + h, eta) - loss(mu - h, eta)) / (2.0 * h);
        let fs = (loss(mu, eta + h) - loss(mu, eta - h)) / (2.0 * h);
        for (a, b) in [(gm, fm), (gs, fs)] {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= GRAD_REL_TOL && secs < 1.0,
        format!("max relative error {worst:.2e} over {GRAD_TRIPLES} triples (tol {GRAD_REL_TOL:e}), {secs:.3} s"),
    )
}

fn c2_screening() -> Outcome {
    let t = Instant::now();
    let mut r = rng(202);
    let mut mismatches = Vec::new();
    for inst in 0..SCREEN_INSTANCES {
        let n = r.random_range(50..300);
        let p = r.random_range(5..=100);
        let p_batch = r.random_range(1..=p);
        let missing = if inst % 2 == 0 { 0.0 } else { 0.02 };
        let cols = random_columns(&mut r, n, p, missing);
        let g = matrix(&cols);
        let resid: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let batch = build_batch(&g, &resid, p_batch, Parameter::Mu, Execution::default()).unwrap();
        let x: Vec<Vec<f64>> = cols.iter().map(|c| imputed(c)).collect();
        let corr: Vec<f64> = x.iter().map(|c| pearson(c, &resid)).collect();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| corr[b].abs().total_cmp(&corr[a].abs()).then(a.cmp(&b)));
        let want: Vec<usize> = order[..p_batch].to_vec();
        let c_stop = order.get(p_batch).map_or(0.0, |&j| corr[j].abs());
        if batch.variant_indices != want || (batch.c_stop - c_stop).abs() > 1e-12 {
            mismatches.push(format!("batch#{inst}"));
            continue;
        }
        // Within-batch choice against a perturbed residual.
        let resid2: Vec<f64> = resid.iter().map(|v| v + 0.3 * normal(&mut r)).collect();
        let target = CenteredTarget::new(&resid2).unwrap();
        let inner = g.correlations(&batch.variant_indices, &target, Execution::default());
        let got = batch.variant_indices[best_in_batch(&batch.variant_indices, &inner).unwrap()];
        let brute = *batch
            .variant_indices
            .iter()
            .min_by(|&&a, &&b| {
                pearson(&x[b], &resid2).abs().total_cmp(&pearson(&x[a], &resid2).abs()).then(a.cmp(&b))
            })
            .unwrap();
        if got != brute {
            mismatches.push(format!("select#{inst}"));
        }
        let again = batch_from_correlations(&corr, p_batch, Parameter::Mu);
        if again.variant_indices != want {
            mismatches.push(format!("order#{inst}"));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        mismatches.is_empty() && secs < 10.0,
        format!("{} of {SCREEN_INSTANCES} instances differ from brute force {mismatches:?}, {secs:.2} s", mismatches.len()),
    )
}

struct SeedResult {
    report: EvalReport,
    /// Benchmark SD correlation for k = 2..=GRID_REPEATS (test rows).
    bench: Vec<f64>,
}

struct Cell {
    h2: f64,
    s: f64,
    seeds: Vec<SeedResult>,
    fixed: Vec<EvalReport>,
}

impl Cell {
    fn mean_of(&self, f: impl Fn(&EvalReport) -> f64) -> f64 {
        mean(&self.seeds.iter().map(|r| f(&r.report)).collect::<Vec<_>>())
    }
}

struct Grid {
    cells: Vec<Cell>,
    secs: f64,
}

fn fit_cohort(cohort: &lssboost::sim::SimulatedCohort, cfg: &BoostConfig) -> EvalReport {
    let (gt, yt) = cohort.part(SplitLabel::Train).unwrap();
    let (gv, yv) = cohort.part(SplitLabel::Valid).unwrap();
    let t = Instant::now();
    let (model, _) = fit(DataView::new(&gt, &yt), DataView::new(&gv, &yv), cfg).unwrap();
    evaluate(&model, cohort, t.elapsed().as_secs_f64()).unwrap()
}

fn run_grid() -> Grid {
    let t = Instant::now();
    let mut cells = Vec::new();
    for &h2 in &GRID_H2 {
        for &s in &GRID_S {
            let mut cell = Cell { h2, s, seeds: Vec::new(), fixed: Vec::new() };
            for seed in 1..=GRID_SEEDS {
                let spec = SimSpec {
                    n: GRID_N,
                    p: GRID_P,
                    h2,
                    sparsity: s,
                    repeats: GRID_REPEATS,
                    split: [0.5, 0.2, 0.3],
                    seed,
                    ..Default::default()
                };
                let cohort = simulate(&spec).unwrap();
                let report = fit_cohort(&cohort, &BoostConfig::default());
                let test = cohort.indices(SplitLabel::Test);
                let st: Vec<f64> = test.iter().map(|&i| cohort.sigma_true[i]).collect();
                let bench = (2..=GRID_REPEATS)
                    .map(|k| {
                        let sd = benchmark_sigma_sd(&cohort, k).unwrap();
                        pearson(&st, &test.iter().map(|&i| sd[i]).collect::<Vec<_>>())
                    })
                    .collect();
                if h2 == 0.7 && s == 0.01 {
                    let cfg = BoostConfig { step_mode: StepMode::fixed(FIXED_NU), ..Default::default() };
                    cell.fixed.push(fit_cohort(&cohort, &cfg));
                }
                eprintln!(
                    "  grid h2={h2} s={s} seed={seed}: r2={:.3} sigma_corr={:.3} ({:.0} s elapsed)",
                    report.r2,
                    report.sigma_corr,
                    t.elapsed().as_secs_f64()
                );
                cell.seeds.push(SeedResult { report, bench });
            }
            cells.push(cell);
        }
    }
    Grid { cells, secs: t.elapsed().as_secs_f64() }
}

fn c3_heritability(g: &Grid) -> Outcome {
    let mut ok = g.secs < 15.0 * 60.0;
    let mut parts = Vec::new();
    for c in &g.cells {
        let r2 = c.mean_of(|r| r.r2);
        let tol = if c.h2 == 0.7 { 0.10 } else { 0.05 };
        ok &= (r2 - c.h2).abs() <= tol;
        parts.push(format!("h2={} s={}: R2={r2:.3} (+-{tol})", c.h2, c.s));
    }
    outcome(ok, format!("{}; grid {:.0} s", parts.join(", "), g.secs))
}

fn c4_sigma(g: &Grid) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &g.cells {
        let v = c.mean_of(|r| r.sigma_corr);
        let floor = if c.s == 0.01 { 0.75 } else { 0.6 };
        ok &= v >= floor;
        parts.push(format!("h2={} s={}: {v:.3} (>= {floor})", c.h2, c.s));
    }
    outcome(ok, parts.join(", "))
}

fn c5_selection(g: &Grid) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &g.cells {
        let tpr = c.mean_of(|r| r.tpr_mu);
        let tnr_mu = c.mean_of(|r| r.tnr_mu);
        let tnr_s = c.mean_of(|r| r.tnr_sigma);
        if c.h2 == 0.7 {
            ok &= tpr >= 0.6;
        }
        ok &= tnr_mu >= 0.95 && tnr_s >= 0.95;
        parts.push(format!("h2={} s={}: TPR_mu={tpr:.3} TNR_mu={tnr_mu:.4} TNR_sigma={tnr_s:.4}", c.h2, c.s));
    }
    outcome(ok, parts.join(", "))
}

fn c6_benchmark(g: &Grid) -> Outcome {
    let Some(c) = g.cells.iter().find(|c| c.h2 == 0.1 && c.s == 0.001) else {
        return outcome(false, "cell missing");
    };
    let wins = c.seeds.iter().filter(|r| r.report.sigma_corr > r.bench[1]).count();
    let frac = wins as f64 / c.seeds.len() as f64;
    let curve: Vec<f64> = (0..GRID_REPEATS - 1).map(|k| mean(&c.seeds.iter().map(|r| r.bench[k]).collect::<Vec<_>>())).collect();
    let monotone = curve.windows(2).all(|w| w[1] >= w[0]);
    let shown: Vec<String> = curve.iter().map(|v| format!("{v:.3}")).collect();
    outcome(
        frac >= 0.8 && monotone,
        format!(
            "vPRS beats k=3 benchmark in {wins}/{} seeds (mean vPRS corr {:.3}); benchmark k=2..{GRID_REPEATS}: [{}]",
            c.seeds.len(),
            c.mean_of(|r| r.sigma_corr),
            shown.join(", ")
        ),
    )
}

fn c7_adaptive(g: &Grid) -> Outcome {
    let Some(c) = g.cells.iter().find(|c| c.h2 == 0.7 && c.s == 0.01) else {
        return outcome(false, "cell missing");
    };
    let gap = |r: &EvalReport| (r.n_selected_mu as f64 - r.n_selected_sigma as f64).abs();
    let adaptive = c.mean_of(gap);
    let fixed = mean(&c.fixed.iter().map(gap).collect::<Vec<_>>());
    let h: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
    let mut unit = true;
    for lambda in [0.1, 0.05, 0.3] {
        unit &= adaptive_step_mu(&h, &vec![1.0; h.len()], lambda) == lambda;
        for c in [2.0, 0.5, 4.0] {
            unit &= adaptive_step_mu(&h, &vec![c; h.len()], lambda) == lambda * c * c;
        }
    }
    outcome(
        adaptive <= fixed && unit,
        format!("mean |n_mu - n_sigma|: adaptive {adaptive:.1}, fixed(nu={FIXED_NU}) {fixed:.1}; step unit examples exact: {unit}"),
    )
}

/// Kolmogorov-Smirnov D against U(0,1), compared with the asymptotic 1% critical value.
fn ks_passes(p: &[f64]) -> (bool, f64) {
    let mut s = p.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max);
    (d < 1.6276 / n.sqrt(), d)
}

fn c8_gxe() -> Outcome {
    let t = Instant::now();
    let exec = Execution::default();
    let p = null_interaction_pvalues(NULL_REPS, NULL_N, 808, exec).unwrap();
    let rate = rejection_rate(&p, 0.05);
    let (ks, d) = ks_passes(&p);
    let est = planted_interaction_estimates(PLANTED_REPS, PLANTED_N, PLANTED, 809, exec).unwrap();
    let m = mean(&est);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        (rate - 0.05).abs() <= 0.02 && ks && (m - PLANTED).abs() <= 0.03 && secs < 300.0,
        format!(
            "null rejection {rate:.3} (0.05+-0.02), KS D={d:.4} uniform at 1%: {ks}; planted {PLANTED} recovered as {m:.4} over {PLANTED_REPS} reps; {secs:.1} s"
        ),
    )
}

/// Newton-Raphson logistic fit with Gauss-Jordan solves.
fn newton_logistic(x: &[Vec<f64>], t: &[bool]) -> Vec<f64> {
    let (n, k) = (t.len(), x.len());
    let mut b = vec![0.0; k];
    for _ in 0..100 {
        let p: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + (-(0..k).map(|a| b[a] * x[a][i]).sum::<f64>()).exp())).collect();
        let mut h: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                let mut row: Vec<f64> = (0..k).map(|c| (0..n).map(|i| p[i] * (1.0 - p[i]) * x[a][i] * x[c][i]).sum()).collect();
                row.push((0..n).map(|i| x[a][i] * (f64::from(u8::from(t[i])) - p[i])).sum());
                row
            })
            .collect();
        for c in 0..k {
            let piv = (c..k).max_by(|&r, &s| h[r][c].abs().total_cmp(&h[s][c].abs())).unwrap();
            h.swap(c, piv);
            for r in 0..k {
                if r != c {
                    let f = h[r][c] / h[c][c];
                    for j in c..=k {
                        h[r][j] -= f * h[c][j];
                    }
                }
            }
        }
        let step: Vec<f64> = (0..k).map(|a| h[a][k] / h[a][a]).collect();
        b.iter_mut().zip(&step).for_each(|(v, s)| *v += s);
        if step.iter().all(|s| s.abs() < 1e-14) {
            break;
        }
    }
    b
}

/// Two-sided Student t tail by Simpson integration of the density.
fn t_two_sided(t: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let dens = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let a = t.abs();
    let steps = 200_000;
    let h = a / steps as f64;
    let mut s = dens(0.0) + dens(a);
    for i in 1..steps {
        s += dens(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

/// Lanczos approximation (g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn c9_iptw() -> Outcome {
    let exec = Execution::default();
    let spec = TrialSpec::default();
    let est = iptw_estimates(IPTW_REPS, &spec, 909, exec).unwrap();
    let truth = spec.effect_low;
    let bw = (mean(&est.iter().map(|e| e.0).collect::<Vec<_>>()) - truth).abs();
    let bu = (mean(&est.iter().map(|e| e.1).collect::<Vec<_>>()) - truth).abs();
    let p = subgroup_pvalues(SUBGROUP_REPS, SUBGROUP_N, -1.0, -0.3, 910, exec).unwrap();
    let power = rejection_rate(&p, 0.05);

    let mut r = rng(911);
    let mut irls_err = 0.0f64;
    for _ in 0..5 {
        let n = 500;
        let x = vec![
            vec![1.0; n],
            (0..n).map(|_| normal(&mut r)).collect::<Vec<_>>(),
            (0..n).map(|_| f64::from(u8::from(r.random::<bool>()))).collect(),
        ];
        let t: Vec<bool> = (0..n).map(|i| r.random::<f64>() < 1.0 / (1.0 + (0.4 - 0.9 * x[1][i] + 0.6 * x[2][i]).exp())).collect();
        let mut d = DesignMatrix::new(n);
        for (k, c) in x.iter().enumerate() {
            d.push(format!("x{k}"), c.clone());
        }
        let fit = logistic_propensity(&d, &t).unwrap();
        for (a, b) in fit.coefficients.iter().zip(newton_logistic(&x, &t)) {
            irls_err = irls_err.max((a - b).abs());
        }
    }
    let mut welch_err = 0.0f64;
    for _ in 0..5 {
        let a: Vec<f64> = (0..30).map(|_| normal(&mut r) + 0.4).collect();
        let b: Vec<f64> = (0..45).map(|_| 1.7 * normal(&mut r)).collect();
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let (va, vb) = (var(&a) / 30.0, var(&b) / 45.0);
        let t = (mean(&a) - mean(&b)) / (va + vb).sqrt();
        let df = (va + vb).powi(2) / (va * va / 29.0 + vb * vb / 44.0);
        let got = two_sample_ttest(&a, &b, TTestKind::Welch).unwrap();
        welch_err = welch_err.max((got.t - t).abs()).max((got.df - df).abs()).max((got.p - t_two_sided(t, df)).abs());
    }
    outcome(
        bw < 0.5 * bu && power >= 0.8 && irls_err <= 1e-6 && welch_err <= 1e-6,
        format!(
            "bias weighted {bw:.4} vs unweighted {bu:.4} ({IPTW_REPS} reps); subgroup power {power:.3} (n={SUBGROUP_N}); IRLS max diff {irls_err:.1e}; Welch max diff {welch_err:.1e}"
        ),
    )
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn c10_determinism() -> Outcome {
    let fx = fixtures();
    let c = fx.join("cohort200");
    let runs: Vec<(Option<&str>, tempfile::TempDir)> =
        [None, None, Some("1"), Some("2"), Some("8")].into_iter().map(|t| (t, tempfile::tempdir().unwrap())).collect();
    for (threads, dir) in &runs {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lssboost"));
        cmd.env_remove("LSSBOOST_THREADS").arg("--out").arg(dir.path());
        if let Some(t) = threads {
            cmd.args(["--threads", t]);
        }
        let out = cmd
            .arg("fit")
            .arg("--text-geno")
            .arg(c.join("genotypes.tsv"))
            .arg("--pheno")
            .arg(c.join("pheno.tsv"))
            .args(["--pheno-col", "baseline", "--split"])
            .arg(c.join("split.tsv"))
            .arg("--config")
            .arg(fx.join("fit.json"))
            .output()
            .unwrap();
        if !out.status.success() {
            return outcome(false, format!("fit failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    let files = ["model.coef.tsv", "model.coef.json", "model.trace.tsv", "model.run.json"];
    let mut diffs = Vec::new();
    for f in files {
        let first = fs::read(runs[0].1.path().join(f)).unwrap();
        for (t, d) in &runs[1..] {
            if fs::read(d.path().join(f)).unwrap() != first {
                diffs.push(format!("{f} threads={t:?}"));
            }
        }
    }
    let golden = fs::read(fx.join("golden/model.coef.tsv")).unwrap() == fs::read(runs[0].1.path().join(files[0])).unwrap();
    outcome(
        diffs.is_empty() && golden,
        format!("5 runs (default x2, threads 1/2/8): differing files {diffs:?}; matches committed golden: {golden}"),
    )
}

fn decode_reference(block: &[u8], n: usize) -> Vec<Option<u8>> {
    (0..n)
        .map(|i| match (block[i / 4] >> (2 * (i % 4))) & 3 {
            0 => Some(2),
            1 => None,
            2 => Some(1),
            _ => Some(0),
        })
        .collect()
}

fn c11_formats() -> Outcome {
    let dir = fixtures().join("plink50x20");
    let g = load_plink(dir.join("geno.bed"), dir.join("geno.bim"), dir.join("geno.fam")).unwrap();
    let bed = fs::read(dir.join("geno.bed")).unwrap();
    let (n, p) = (g.n_samples(), g.n_variants());
    let bpv = n.div_ceil(4);
    let patterns: BTreeSet<u8> = bed[3..].iter().copied().collect();
    let mut bad = 0;
    for j in 0..p {
        if g.raw_column(j) != decode_reference(&bed[3 + j * bpv..3 + (j + 1) * bpv], n) {
            bad += 1;
        }
    }
    let expected = fs::read_to_string(dir.join("expected_dosages.tsv")).unwrap();
    let mut table_bad = 0;
    for (i, line) in expected.lines().skip(1).enumerate() {
        for (j, v) in line.split('\t').skip(2).enumerate() {
            let want = if v == "NA" { None } else { Some(v.parse::<u8>().unwrap()) };
            if g.raw_column(j)[i] != want {
                table_bad += 1;
            }
        }
    }
    let tmp = tempfile::tempdir().unwrap();
    let mut round_trip = true;
    for (name, m) in [
        ("plink", g.clone()),
        ("cohort", load_text_matrix(fixtures().join("cohort200/genotypes.tsv")).unwrap()),
    ] {
        let a = tmp.path().join(format!("{name}.a.tsv"));
        let b = tmp.path().join(format!("{name}.b.tsv"));
        write_text_matrix(&m, &a).unwrap();
        let back = load_text_matrix(&a).unwrap();
        write_text_matrix(&back, &b).unwrap();
        round_trip &= back == m && fs::read(&a).unwrap() == fs::read(&b).unwrap();
    }
    outcome(
        bad == 0 && table_bad == 0 && patterns.len() == 256 && (n, p) == (50, 20) && round_trip,
        format!(
            "{n}x{p} fixture, {} distinct byte patterns, {bad} variants differ from reference decoder, {table_bad} cells differ from expected table; text round trip identity: {round_trip}",
            patterns.len()
        ),
    )
}

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let want = |k: usize| only.as_ref().is_none_or(|s| s.contains(&k));
    let names = [
        "gradient oracle",
        "screening exactness",
        "heritability recovery",
        "sigma recovery",
        "variant selection",
        "benchmark crossover",
        "adaptive vs fixed step",
        "GxE calibration and recovery",
        "IPTW pipeline",
        "determinism and threading",
        "format fidelity",
    ];
    let grid = if (3..=7).any(want) {
        eprintln!("running desk grid ({} cells x {GRID_SEEDS} seeds, n={GRID_N}, p={GRID_P})", GRID_H2.len() * GRID_S.len());
        Some(run_grid())
    } else {
        None
    };
    let mut failed = 0;
    for (k, name) in names.iter().enumerate().map(|(i, n)| (i + 1, n)) {
        if !want(k) {
            continue;
        }
        let o = match k {
            1 => c1_gradient(),
            2 => c2_screening(),
            3 => c3_heritability(grid.as_ref().unwrap()),
            4 => c4_sigma(grid.as_ref().unwrap()),
            5 => c5_selection(grid.as_ref().unwrap()),
            6 => c6_benchmark(grid.as_ref().unwrap()),
            7 => c7_adaptive(grid.as_ref().unwrap()),
            8 => c8_gxe(),
            9 => c9_iptw(),
            10 => c10_determinism(),
            _ => c11_formats(),
        };
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {k:>2} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {failed} criteria failed");
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
