use std::hint::black_box;

use bpbeta::oracle::{chart, har_step};
use bpbeta::rng::{stream_rng, Stream};
use bpbeta_bench::{er_instance, SEED};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn har(c: &mut Criterion) {
    let mut group = c.benchmark_group("har_step");
    for n in [100usize, 400] {
        let sys = er_instance(n);
        let ch = chart(&sys).unwrap();
        let mut rng = stream_rng(SEED, Stream::Mcmc);
        let mut x = ch.point.clone();
        group.bench_with_input(BenchmarkId::from_parameter(n), &ch, |b, ch| {
            b.iter(|| {
                x = har_step(ch, black_box(&x), &mut rng).unwrap();
            })
        });
    }
    group.finish();
}

fn build_chart(c: &mut Criterion) {
    let sys = er_instance(400);
    c.bench_function("chart/400", |b| b.iter(|| chart(black_box(&sys)).unwrap()));
}

criterion_group!(benches, har, build_chart);
criterion_main!(benches);
