use criterion::{black_box, criterion_group, criterion_main, Criterion};

use zic_core::counterexample::{condition54_root, lemma2_gap, Recipe};
use zic_core::entropy::{geomspace, lemma1_expansion};
use zic_core::geometry::theorem7_sweep;
use zic_core::hessian::phase_diagram;
use zic_core::hk::{g1, HKParams};

fn entropy(c: &mut Criterion) {
    let r = Recipe::default();
    let ts = geomspace(1e-4, 1e-2, 12);
    c.bench_function("lemma1_expansion default recipe", |b| {
        b.iter(|| lemma1_expansion(black_box(&r.p), black_box(&r.q), &ts).unwrap())
    });
    let ts = geomspace(2e-3, 3e-2, 8);
    c.bench_function("lemma2_gap 8 points", |b| b.iter(|| lemma2_gap(black_box(&ts), &r).unwrap()));
}

fn stability(c: &mut Criterion) {
    c.bench_function("condition54_root u=1", |b| b.iter(|| condition54_root(black_box(1.0), 0.0, 1e-12).unwrap()));
    let us: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1).collect();
    let ls: Vec<f64> = (1..=100).map(|i| 1.0 + i as f64 * 0.05).collect();
    c.bench_function("phase_diagram 40x100", |b| b.iter(|| phase_diagram(black_box(&us), &ls).unwrap()));
}

fn envelope(c: &mut Criterion) {
    let p = HKParams::new(1.0, 0.5, 1.0, 2.0, 1.0).unwrap();
    let mut g = c.benchmark_group("envelope");
    g.sample_size(10);
    g.bench_function("g1 at (2, 1)", |b| b.iter(|| g1(black_box(2.0), black_box(1.0), &p).unwrap()));
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let ts: Vec<f64> = (20..=200).map(f64::from).collect();
    c.bench_function("minkowski ratio sweep 181 points", |b| b.iter(|| theorem7_sweep(black_box(&ts), false).unwrap()));
}

criterion_group!(benches, entropy, stability, envelope, geometry);
criterion_main!(benches);
