use criterion::{criterion_group, criterion_main, Criterion};
use qipf_core::{point_biserial, pr_auc, roc_auc};
use std::hint::black_box;

fn data(n: usize) -> (Vec<f64>, Vec<bool>) {
    let scores: Vec<f64> = (0..n).map(|i| (i as f64 * 0.754_877_666).fract()).collect();
    let errors = scores
        .iter()
        .enumerate()
        .map(|(i, s)| (s + (i as f64 * 0.569_840_29).fract()) > 1.2)
        .collect();
    (scores, errors)
}

fn bench_metrics(c: &mut Criterion) {
    let (s, e) = data(10_000);
    c.bench_function("roc_auc_10k", |b| b.iter(|| roc_auc(black_box(&s), &e).unwrap()));
    c.bench_function("pr_auc_10k", |b| b.iter(|| pr_auc(black_box(&s), &e).unwrap()));
    c.bench_function("point_biserial_10k", |b| {
        b.iter(|| point_biserial(black_box(&s), &e).unwrap())
    });
}

criterion_group!(benches, bench_metrics);
criterion_main!(benches);
