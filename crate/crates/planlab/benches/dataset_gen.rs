//! Dataset generation throughput, parallel scan against the sequential
//! fallback. Same seed, so both sides do identical search work.

use criterion::{criterion_group, criterion_main, Criterion};
use planlab::bwgen::{dataset_seq, dataset_with_threads, BwDatasetSpec, InclusiveRange};

fn spec() -> BwDatasetSpec {
    BwDatasetSpec::new(InclusiveRange::new(5, 6), InclusiveRange::new(12, 16), 24, 7)
}

fn bench_generation(c: &mut Criterion) {
    let spec = spec();
    let mut group = c.benchmark_group("bw_dataset");
    group.sample_size(10);
    group.bench_function("parallel_4", |b| {
        b.iter(|| dataset_with_threads(&spec, 4).expect("dataset"))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| dataset_seq(&spec).expect("dataset"))
    });
    group.finish();
}

criterion_group!(benches, bench_generation);
criterion_main!(benches);
