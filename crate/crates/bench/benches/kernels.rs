use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rstein_core::mc::{Rng, Sampler};
use rstein_core::subgraph::{CopyCatalog, PatternGraph, SubgraphSampler};
use rstein_core::tworuns::CoefficientSequence;
use rstein_core::verify::{random_functional, random_space};
use rstein_core::TwoRunsModel;

fn walsh(c: &mut Criterion) {
    let mut group = c.benchmark_group("walsh");
    for n in [8usize, 12] {
        let mut rng = Rng::seed_from_u64(n as u64);
        let space = random_space(&mut rng, n, n, 0.2, 0.8);
        let f = random_functional(&mut rng, &space, 0.3);
        let g = random_functional(&mut rng, &space, 0.3);
        group.bench_with_input(BenchmarkId::new("mul", n), &n, |b, _| b.iter(|| black_box(&f).mul(&g).unwrap()));
        group.bench_with_input(BenchmarkId::new("values", n), &n, |b, _| b.iter(|| black_box(&f).values().unwrap()));
        group.bench_with_input(BenchmarkId::new("ou_inverse", n), &n, |b, _| b.iter(|| black_box(&f).ou_inverse()));
    }
    group.finish();
}

fn catalog(c: &mut Criterion) {
    let mut group = c.benchmark_group("catalog");
    group.sample_size(10);
    let k3 = PatternGraph::complete(3).unwrap();
    let c4 = PatternGraph::cycle(4).unwrap();
    for n in [20usize, 36] {
        group.bench_with_input(BenchmarkId::new("K3", n), &n, |b, &n| b.iter(|| CopyCatalog::enumerate(&k3, n, 0.3).unwrap()));
    }
    group.bench_function("C4/16", |b| b.iter(|| CopyCatalog::enumerate(&c4, 16, 0.3).unwrap()));
    group.finish();
}

fn samplers(c: &mut Criterion) {
    let mut group = c.benchmark_group("samplers");
    let cat = CopyCatalog::enumerate(&PatternGraph::complete(3).unwrap(), 36, 0.3).unwrap();
    let subgraph = SubgraphSampler::new(&cat).unwrap();
    let runs = TwoRunsModel::new(CoefficientSequence::indicator(1024).unwrap()).unwrap().sampler();
    let mut rng = Rng::seed_from_u64(7);
    group.bench_function("K3/36", |b| b.iter(|| subgraph.draw(&mut rng)));
    group.bench_function("2-runs/1024", |b| b.iter(|| runs.draw(&mut rng)));
    group.finish();
}

criterion_group!(benches, walsh, catalog, samplers);
criterion_main!(benches);
