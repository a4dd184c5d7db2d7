use std::hint::black_box;
use std::sync::Arc;

use brace_forge::brace::verify_brace;
use brace_forge::corr::{star_op, CorrContext};
use brace_forge::flows::{flows_circ, verify_roundtrip, FlowsContext};
use brace_forge::prelie::extract_prelie;
use brace_forge::{GElement, PullbackChoice};
use brace_forge_bench::{budget, extracted, radical};
use criterion::{criterion_group, criterion_main, Criterion};

fn axioms(c: &mut Criterion) {
    let b = radical(7, 3);
    c.bench_function("verify_brace/radical-7^3", |bn| bn.iter(|| black_box(verify_brace(&b, &budget()))));
}

fn extraction(c: &mut Criterion) {
    let b = radical(13, 3);
    c.bench_function("extract_prelie/radical-13^3", |bn| {
        bn.iter(|| black_box(extract_prelie(&b, 1, PullbackChoice::Canonical, &budget()).unwrap()))
    });
}

fn flows(c: &mut Criterion) {
    let pl = extracted(11, 3);
    c.bench_function("flows_circ/extracted-11^3", |bn| {
        bn.iter(|| {
            let ctx = Arc::new(FlowsContext::new(&pl, PullbackChoice::Canonical).unwrap());
            black_box(flows_circ(ctx).unwrap())
        })
    });
}

fn star(c: &mut Criterion) {
    let b = radical(13, 6);
    let ctx = CorrContext::new(&b, 1, PullbackChoice::Canonical, &budget()).unwrap();
    let (x, y) = (GElement::from_slice(&[12345]), GElement::from_slice(&[678]));
    c.bench_function("star_op/radical-13^6", |bn| bn.iter(|| black_box(star_op(&ctx, &x, &y).unwrap())));
}

fn roundtrip(c: &mut Criterion) {
    let b = radical(13, 4);
    let mut g = c.benchmark_group("roundtrip");
    g.sample_size(10);
    g.bench_function("radical-13^4", |bn| {
        bn.iter(|| black_box(verify_roundtrip(&b, 1, PullbackChoice::Canonical, &budget()).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, axioms, extraction, flows, star, roundtrip);
criterion_main!(benches);
