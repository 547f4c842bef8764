use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qhnn_core::{
    quantize, random_hermitian_weights, random_state, run, Model, PhaseTriple, Quaternion, ResolutionFactors,
    RunConfig, UpdateMode,
};

fn quaternion_ops(c: &mut Criterion) {
    let p = Quaternion::new(5.0, 1.0, 7.0, 2.0);
    let q = Quaternion::new(-0.2706, -0.6533, -0.2706, 0.6533);
    c.bench_function("hamilton_product", |b| b.iter(|| black_box(p) * black_box(q)));
    let v = p * q;
    c.bench_function("to_phase_angles", |b| b.iter(|| black_box(v).to_phase_angles()));
    let angles = PhaseTriple::new(2.19, 0.094, 1.41);
    c.bench_function("from_phase_angles", |b| b.iter(|| Quaternion::from_phase_angles(black_box(angles), 1.0)));
    let k = ResolutionFactors::uniform(1 << 10).unwrap();
    c.bench_function("quantize", |b| b.iter(|| quantize(black_box(angles), k)));
}

fn trajectories(c: &mut Criterion) {
    let n = 20;
    let k = ResolutionFactors::uniform(16).unwrap();
    let w = random_hermitian_weights(n, 1);
    let x0 = random_state(n, k, 2);
    let mut group = c.benchmark_group("run_n20_t50");
    for model in Model::ALL {
        for mode in UpdateMode::ALL {
            let res = model.is_multivalued().then_some(k);
            let cfg = RunConfig::new(model, mode, res, 50);
            let id = BenchmarkId::new(model.short_name(), mode.short_name());
            group.bench_function(id, |b| b.iter(|| run(&w, black_box(&x0), &cfg).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, quaternion_ops, trajectories);
criterion_main!(benches);
