use std::hint::black_box;

use bpbeta::beta::{
    moments_from_shape, product_moments, shape_from_moments, truncated_moments, weighted_sum_density_at,
};
use bpbeta::BetaMessage;
use criterion::{criterion_group, criterion_main, Criterion};

fn shape_round_trip(c: &mut Criterion) {
    c.bench_function("moments_round_trip", |b| {
        b.iter(|| {
            let (mu, s2) = moments_from_shape(black_box(3.5), black_box(7.25), 0.0, 2.0).unwrap();
            shape_from_moments(mu, s2, 0.0, 2.0).unwrap()
        })
    });
}

fn truncation(c: &mut Criterion) {
    let m = BetaMessage::new(2.5, 2.5, 0.0, 2.0).unwrap();
    c.bench_function("truncated_moments", |b| {
        b.iter(|| truncated_moments(black_box(&m), 0.0, 1.0).unwrap())
    });
}

fn products(c: &mut Criterion) {
    let msgs = [
        BetaMessage::new(2.0, 3.0, 0.0, 1.0).unwrap(),
        BetaMessage::new(4.0, 1.5, 0.1, 1.2).unwrap(),
        BetaMessage::new(1.2, 1.2, -0.2, 0.9).unwrap(),
    ];
    let mut group = c.benchmark_group("product_moments");
    for k in 1..=msgs.len() {
        group.bench_function(k.to_string(), |b| {
            b.iter(|| product_moments(black_box(&msgs[..k]), 0.0, 1.0).unwrap())
        });
    }
    group.finish();
}

fn sum_density(c: &mut Criterion) {
    let u = BetaMessage::uniform(0.0, 1.0);
    let terms = [(1.0, u), (1.0, u), (1.0, u)];
    c.bench_function("weighted_sum_density/3", |b| {
        b.iter(|| weighted_sum_density_at(black_box(&terms), 1.4))
    });
}

criterion_group!(benches, shape_round_trip, truncation, products, sum_density);
criterion_main!(benches);
