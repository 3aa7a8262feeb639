use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pconvex::{arc_max_exp, check_lower_bound, empirical_modulus, Generator, Modulus};
use pconvex_bench::{context, delta_points};

fn arc(c: &mut Criterion) {
    c.bench_function("arc_max_exp", |b| b.iter(|| arc_max_exp(black_box(1.0), 0.5).unwrap()));
}

fn empirical(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_modulus");
    group.sample_size(10);
    for (spec, w) in [
        ("power:p=2", vec![1.0, 1.0]),
        ("exp:a=e", vec![1.0, 1.0]),
        ("power:p=3", vec![1.0, 0.5, 2.0]),
    ] {
        let ctx = context(spec, &w);
        group.bench_function(format!("{spec}/k={}/4096", w.len()), |b| {
            b.iter(|| empirical_modulus(&ctx, 1.0, black_box(0.8), 4096, 1).unwrap())
        });
    }
    group.finish();
}

fn lower_bound(c: &mut Criterion) {
    let mut group = c.benchmark_group("check_lower_bound");
    group.sample_size(10);
    let ctx = context("power:p=3", &[1.0, 1.0]);
    let m = Modulus::EA(Generator::power(3.0).unwrap());
    let pts = delta_points(3);
    group.bench_function("power3/eA/3x3/2000", |b| {
        b.iter(|| check_lower_bound(&ctx, &m, black_box(&pts), 2000, 5, 1.0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, arc, empirical, lower_bound);
criterion_main!(benches);
