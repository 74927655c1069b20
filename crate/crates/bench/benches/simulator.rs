use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use qttt_core::circuits::{compose_layer, AnsatzKind, EmbeddingKind};
use qttt_core::qsim::{self, RotationKind, Statevector};

fn gates(c: &mut Criterion) {
    let mut g = c.benchmark_group("gate");
    for n in [8, 16, 18] {
        let mut s = Statevector::zero(n).unwrap();
        g.bench_with_input(BenchmarkId::new("ry", n), &n, |b, &n| {
            b.iter(|| s.apply_rotation(RotationKind::Ry, black_box(n / 2), 0.3))
        });
        g.bench_with_input(BenchmarkId::new("cx", n), &n, |b, &n| b.iter(|| s.apply_cx(black_box(0), n - 1)));
    }
    g.finish();
}

fn circuits(c: &mut Criterion) {
    let mut g = c.benchmark_group("circuit");
    for (emb, ans, n) in [
        (EmbeddingKind::ZZFeatureMap, AnsatzKind::RealAmplitudes, 8),
        (EmbeddingKind::Hee, AnsatzKind::EfficientSU2, 16),
        (EmbeddingKind::Tpe, AnsatzKind::Qcnn, 18),
    ] {
        let circ = compose_layer(emb, ans, n).unwrap();
        let x = vec![0.5; circ.num_inputs()];
        let p = vec![1.1; circ.num_params()];
        g.bench_function(format!("{emb}+{ans}/{n}"), |b| b.iter(|| qsim::run(&circ, black_box(&x), &p).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, gates, circuits);
criterion_main!(benches);
