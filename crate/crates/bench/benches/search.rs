use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use rbc_bench::workload;
use rbc_core::rbc::{build_exact, build_one_shot, one_shot_params, standard_params_exact};
use rbc_core::search::{exact_query_batch, one_shot_query_batch};
use rbc_core::{bf_search, BuildParams, MetricKind, MetricSpec};

const QUERIES: usize = 256;

fn search(c: &mut Criterion) {
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    for &(n, d) in &[(20_000usize, 8usize), (100_000, 16)] {
        let (x, q) = workload(n, QUERIES, d, 1);
        let m = MetricSpec::new(MetricKind::Euclidean, d).unwrap();
        group.throughput(Throughput::Elements(QUERIES as u64));
        let label = format!("n{n}_d{d}");

        group.bench_with_input(BenchmarkId::new("brute", &label), &(), |b, _| {
            b.iter(|| bf_search(black_box(&q), &x, &m, 1).unwrap())
        });

        let nr = standard_params_exact(n, 1.0).unwrap();
        let exact = build_exact(x.clone(), m, &BuildParams::new(nr, 7)).unwrap();
        group.bench_with_input(BenchmarkId::new("exact", &label), &(), |b, _| {
            b.iter(|| exact_query_batch(&exact, black_box(&q), 1).unwrap())
        });

        let (nr, s) = one_shot_params(n, 1.0, 0.1).unwrap();
        let one_shot = build_one_shot(x.clone(), m, &BuildParams::new(nr, 7), s).unwrap();
        group.bench_with_input(BenchmarkId::new("oneshot", &label), &(), |b, _| {
            b.iter(|| one_shot_query_batch(&one_shot, black_box(&q), 1).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, search);
criterion_main!(benches);
