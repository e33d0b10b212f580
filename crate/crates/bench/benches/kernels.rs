use std::hint::black_box;

use conecover::branching::gw_trials;
use conecover::generating::{analyze, GfOptions};
use conecover::graph::ValidateOptions;
use conecover::spectral::{count_levels, cw_certify, truncated_pf, MatrixKind, Ones};
use conecover::walk::{simulate_run, Record};
use conecover::{validate_spec, BaseGraph, GeneratorSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const ENTROPY_EXAMPLE: &str = r#"{
    "epsilon": 1e-6, "root": "i0", "kernel": "tree",
    "vertices": ["i0", "i1", "i2"],
    "edges": [
        {"from": "i0", "to": "i1", "p": 0.3333333333333333},
        {"from": "i0", "to": "i2", "p": 0.3333333333333333},
        {"from": "i1", "to": "i0", "p": 0.5},
        {"from": "i2", "to": "i1", "p": 0.75}
    ],
    "backward": {"i0": 0.3333333333333333, "i1": 0.5, "i2": 0.25}
}"#;

fn entropy_example() -> BaseGraph {
    validate_spec(ENTROPY_EXAMPLE, ValidateOptions::default()).unwrap().graph
}

fn generator(name: &str) -> BaseGraph {
    GeneratorSpec::new(name).build().unwrap()
}

fn walk(c: &mut Criterion) {
    let mut group = c.benchmark_group("walk_10k_steps");
    for (name, g) in [
        ("entropy_example", entropy_example()),
        ("halfline_critical", generator("halfline_critical")),
        ("two_sided_line", generator("two_sided_line")),
    ] {
        group.bench_function(name, |b| {
            let mut run = 0;
            b.iter(|| {
                run += 1;
                simulate_run(&g, 10_000, 0, run, &[], Record::default()).unwrap()
            })
        });
    }
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let g = generator("halfline_critical");
    let mut group = c.benchmark_group("truncated_pf_halfline");
    for radius in [50, 200] {
        group.bench_with_input(BenchmarkId::from_parameter(radius), &radius, |b, &r| {
            b.iter(|| truncated_pf(&g, MatrixKind::Mean, r, 1e-12).unwrap())
        });
    }
    group.finish();
    let line = generator("two_sided_line");
    c.bench_function("cw_certify_line_r200", |b| {
        b.iter(|| cw_certify(&line, MatrixKind::Adjacency, &Ones, 2.0, black_box(200)).unwrap())
    });
}

fn generating(c: &mut Criterion) {
    let g = entropy_example();
    c.bench_function("analyze_entropy_example", |b| {
        b.iter(|| analyze(black_box(&g), &[], &GfOptions::default()).unwrap())
    });
    let h = generator("halfline_critical");
    let opts = GfOptions {
        radius: Some(50),
        ..GfOptions::default()
    };
    let mut group = c.benchmark_group("analyze_halfline_critical");
    group.sample_size(10);
    group.bench_function("r50", |b| b.iter(|| analyze(black_box(&h), &[], &opts).unwrap()));
    group.finish();
}

fn levels(c: &mut Criterion) {
    let g = generator("oscillating_growth");
    c.bench_function("count_levels_oscillating_32", |b| {
        b.iter(|| count_levels(&g, black_box(32), 1_000_000).unwrap())
    });
}

fn branching(c: &mut Criterion) {
    let g = entropy_example();
    let mut group = c.benchmark_group("gw");
    group.sample_size(10);
    group.bench_function("entropy_example_100_trials", |b| {
        b.iter(|| gw_trials(&g, 100, 10_000, 1e4, black_box(0)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, walk, spectral, generating, levels, branching);
criterion_main!(benches);
