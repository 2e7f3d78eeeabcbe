use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use embedviz_core::classifiers::{fit, ClassifierSpec, MlpParams};
use embedviz_core::data::generate_synthetic;

fn bench_fits(c: &mut Criterion) {
    let train = generate_synthetic(200, 2, 0.3, 4.0, 7).unwrap();
    for spec in ClassifierSpec::default_suite(1) {
        // The full epoch budget belongs to pipeline runs, not micro-benches.
        let spec = match spec {
            ClassifierSpec::Mlp(p) => ClassifierSpec::Mlp(MlpParams {
                max_epochs: 100,
                ..p
            }),
            other => other,
        };
        c.bench_function(&format!("fit_{}_n200_2d", spec.kind().file_stem()), |b| {
            b.iter(|| fit(&spec, black_box(&train)).unwrap())
        });
    }
}

fn bench_predict(c: &mut Criterion) {
    let train = generate_synthetic(200, 2, 0.3, 4.0, 7).unwrap();
    let query = generate_synthetic(1000, 2, 0.3, 4.0, 8).unwrap();
    for spec in ClassifierSpec::default_suite(1) {
        let model = fit(&spec, &train).unwrap();
        c.bench_function(
            &format!("predict_score_{}_m1000", spec.kind().file_stem()),
            |b| {
                b.iter(|| {
                    model
                        .predict_score(&black_box(&query).samples().view())
                        .unwrap()
                })
            },
        );
    }
}

criterion_group!(
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_fits, bench_predict
);
criterion_main!(benches);
