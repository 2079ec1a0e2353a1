use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lssboost::genotype::CenteredTarget;
use lssboost::sim::{simulate, SimSpec};
use lssboost::sim::SplitLabel;
use lssboost::{fit_with, BoostConfig, DataView, Execution};

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn correlation_scan(c: &mut Criterion) {
    let spec = SimSpec { n: 2000, p: 4000, repeats: 1, ..Default::default() };
    let cohort = simulate(&spec).unwrap();
    let target = CenteredTarget::new(&cohort.baseline_y).unwrap();
    let g = &cohort.matrix;
    let mut group = c.benchmark_group("correlation_scan");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, spec.p), &exec, |b, &exec| {
            b.iter(|| black_box(g.all_correlations(&target, exec)))
        });
    }
    group.finish();
}

fn small_fit(c: &mut Criterion) {
    let spec = SimSpec { n: 1000, p: 1000, repeats: 1, ..Default::default() };
    let cohort = simulate(&spec).unwrap();
    let (gt, yt) = cohort.part(SplitLabel::Train).unwrap();
    let (gv, yv) = cohort.part(SplitLabel::Valid).unwrap();
    let cfg = BoostConfig { p_batch: 200, m_batch: 200, b_max: 5, ..Default::default() };
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new(name, spec.p), &exec, |b, &exec| {
            b.iter(|| black_box(fit_with(DataView::new(&gt, &yt), DataView::new(&gv, &yv), &cfg, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, correlation_scan, small_fit);
criterion_main!(benches);
