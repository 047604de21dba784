//! Microbenchmarks for the numerical kernels: SVD, strong RRQR selection,
//! dominant-submatrix search, and the structured fast transforms.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use curlra::maxvol::{lup_ca, strong_rrqr_cols, RRQR_H};
use curlra::preprocess::{build_arht, build_gaussian};
use curlra::rng;
use curlra::svd::{singular_values, svd};
use curlra_bench::bench_input;

fn bench_svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd");
    for &n in &[32usize, 64, 128] {
        let w = bench_input(n, n / 8, 7);
        group.bench_with_input(BenchmarkId::new("full", n), &w, |b, w| {
            b.iter(|| svd(black_box(w)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("values_only", n), &w, |b, w| {
            b.iter(|| singular_values(black_box(w)).unwrap())
        });
    }
    group.finish();
}

fn bench_selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("selection");
    for &(r, n) in &[(8usize, 256usize), (16, 512)] {
        let w = bench_input(n, r, 11).select_rows(&(0..r).collect::<Vec<_>>());
        group.bench_with_input(
            BenchmarkId::new("lup_ca", format!("{r}x{n}")),
            &w,
            |b, w| b.iter(|| lup_ca(black_box(w), 10 * w.ncols() * w.nrows()).unwrap()),
        );
        group.bench_with_input(
            BenchmarkId::new("strong_rrqr", format!("{r}x{n}")),
            &w,
            |b, w| b.iter(|| strong_rrqr_cols(black_box(w), w.nrows(), RRQR_H).unwrap()),
        );
    }
    group.finish();
}

fn bench_transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("transforms");
    let n = 1024;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.173).sin()).collect();
    for &d in &[1usize, 3, 10] {
        let op = build_arht(n, d, &mut rng::seeded(5)).unwrap();
        group.bench_with_input(BenchmarkId::new("arht_apply", d), &op, |b, op| {
            b.iter(|| op.apply_transpose(black_box(&x)))
        });
    }
    let dense = build_gaussian(n, n, &mut rng::seeded(6));
    group.bench_function("dense_apply", |b| {
        b.iter(|| dense.apply_transpose(black_box(&x)))
    });
    group.finish();
}

criterion_group!(benches, bench_svd, bench_selection, bench_transforms);
criterion_main!(benches);
