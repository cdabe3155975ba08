use std::hint::black_box;
use std::time::Duration;

use bpbeta::{BpConfig, BpState, Schedule};
use bpbeta_bench::er_instance;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    for n in [250usize, 500, 1000, 2000] {
        let sys = er_instance(n);
        group.throughput(Throughput::Elements(sys.entries().len() as u64));
        for schedule in [Schedule::Sequential, Schedule::Synchronous] {
            let cfg = BpConfig {
                schedule,
                ..BpConfig::default()
            };
            let state = BpState::init(&sys, &cfg).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("{schedule:?}"), n), &state, |b, s| {
                b.iter_batched(
                    || s.clone(),
                    |mut s| black_box(s.sweep().unwrap()),
                    criterion::BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

fn entropy(c: &mut Criterion) {
    let sys = er_instance(500);
    let mut state = BpState::init(&sys, &BpConfig::default()).unwrap();
    state.run_to_convergence().unwrap();
    c.bench_function("entropy/500", |b| b.iter(|| black_box(state.entropy().unwrap().h)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20).measurement_time(Duration::from_secs(5));
    targets = sweep, entropy
}
criterion_main!(benches);
