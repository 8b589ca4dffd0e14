use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use tdvi_bench::fixture;
use tdvi_core::{build_index, Ranker, RankerParams, StatsBundle};

fn bench_build(c: &mut Criterion) {
    let fx = fixture(7);
    c.bench_function("build_index planted 500 docs", |b| {
        b.iter(|| build_index(black_box(fx.docs.clone())).unwrap())
    });
}

fn bench_retrieval(c: &mut Criterion) {
    let fx = fixture(7);
    let params = RankerParams::default();
    let raw_stats = StatsBundle::compute(&fx.index).unwrap();
    let w_stats = StatsBundle::compute(&fx.weighted).unwrap();
    let p_stats = StatsBundle::compute(&fx.pruned).unwrap();

    let mut group = c.benchmark_group("retrieve top-1000");
    for ranker in [Ranker::TfIdfSmooth, Ranker::Bm25, Ranker::Lm] {
        group.bench_function(format!("{} raw", ranker.name()), |b| {
            b.iter(|| {
                for (_, q) in &fx.queries {
                    black_box(tdvi_core::ranking::retrieve(
                        &fx.index, ranker, &raw_stats, q, 1000, &params,
                    ));
                }
            })
        });
        group.bench_function(format!("{} weighted unpruned", ranker.name()), |b| {
            b.iter(|| {
                for (_, q) in &fx.queries {
                    black_box(tdvi_core::ranking::retrieve(
                        &fx.weighted,
                        ranker,
                        &w_stats,
                        q,
                        1000,
                        &params,
                    ));
                }
            })
        });
        group.bench_function(format!("{} weighted pruned", ranker.name()), |b| {
            b.iter(|| {
                for (_, q) in &fx.queries {
                    black_box(tdvi_core::ranking::retrieve(
                        &fx.pruned, ranker, &p_stats, q, 1000, &params,
                    ));
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_build, bench_retrieval);
criterion_main!(benches);
