//! Cover construction and cover verification, one worker versus all workers.
//!
//! `cargo bench -p affine-abstraction` compares a single-thread rayon pool
//! against the default pool. Building with `--no-default-features` removes
//! rayon and benchmarks the plain sequential code path instead.

use affine_abstraction::cover::{eps_cover, Cover, CoverRequest};
use affine_abstraction::funcspec::builtin;
use affine_abstraction::smoothness::{estimate_constants, SmoothnessClass};
use affine_abstraction::verify::{check_cover, DEFAULT_TOLERANCE};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn xcosy_request(epsilon: f64) -> CoverRequest {
    let b = builtin("xcosy").unwrap();
    let k = estimate_constants(&b.spec, &b.domain, SmoothnessClass::C2, 50, 1.1).unwrap();
    CoverRequest::new(b.spec, b.domain, vec![10, 10], epsilon, k)
}

fn verify(cover: &Cover) {
    let report = check_cover(cover, &cover.request.spec, 2000, 0, DEFAULT_TOLERANCE).unwrap();
    assert_eq!(report.violations, 0);
}

#[cfg(feature = "parallel")]
fn pools() -> Vec<(String, rayon::ThreadPool)> {
    // At least two workers, so a single-core machine still shows the
    // scheduling overhead.
    let all = rayon::current_num_threads().max(2);
    [1, all]
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap();
            (format!("{n}-threads"), pool)
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn bench(c: &mut Criterion) {
    let pools = pools();
    let mut group = c.benchmark_group("eps_cover");
    group.sample_size(10);
    for epsilon in [0.2, 0.05] {
        let req = xcosy_request(epsilon);
        for (name, pool) in &pools {
            group.bench_with_input(BenchmarkId::new(name.as_str(), epsilon), &req, |b, req| {
                b.iter(|| pool.install(|| eps_cover(req).unwrap()))
            });
        }
    }
    group.finish();

    let cover = eps_cover(&xcosy_request(0.05)).unwrap();
    let mut group = c.benchmark_group("check_cover");
    group.sample_size(10);
    for (name, pool) in &pools {
        group.bench_function(name.as_str(), |b| {
            b.iter(|| pool.install(|| verify(&cover)))
        });
    }
    group.finish();
}

#[cfg(not(feature = "parallel"))]
fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("eps_cover");
    group.sample_size(10);
    for epsilon in [0.2, 0.05] {
        let req = xcosy_request(epsilon);
        group.bench_with_input(BenchmarkId::new("sequential", epsilon), &req, |b, req| {
            b.iter(|| eps_cover(req).unwrap())
        });
    }
    group.finish();

    let cover = eps_cover(&xcosy_request(0.05)).unwrap();
    let mut group = c.benchmark_group("check_cover");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| verify(&cover)));
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
