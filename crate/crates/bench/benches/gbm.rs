use cellmine_bench::regression_dataset;
use cellmine_core::ml::{fit_gbm, predict, GbmParams};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn bench_gbm(c: &mut Criterion) {
    let ds = regression_dataset(300, 30, 3);
    let params = GbmParams { n_trees: 100, ..GbmParams::default() };
    c.bench_function("gbm_fit_100_rounds", |b| b.iter(|| fit_gbm(black_box(&ds), &params, 42)));
    let model = fit_gbm(&ds, &params, 42).expect("gbm fits");
    c.bench_function("gbm_predict", |b| b.iter(|| predict(black_box(&model), &ds.x)));
}

criterion_group!(benches, bench_gbm);
criterion_main!(benches);
