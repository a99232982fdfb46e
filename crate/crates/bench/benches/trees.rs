use cellmine_bench::regression_dataset;
use cellmine_core::ml::{fit_cart, fit_forest, ForestParams, Task, TreeParams};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn bench_cart(c: &mut Criterion) {
    let mut g = c.benchmark_group("cart");
    for n in [100, 1000] {
        let ds = regression_dataset(n, 30, 1);
        g.bench_function(format!("{n}_rows"), |b| {
            b.iter(|| fit_cart(black_box(&ds.x), &ds.y, Task::Regression, &TreeParams::default()))
        });
    }
    g.finish();
}

fn bench_forest(c: &mut Criterion) {
    let ds = regression_dataset(300, 30, 2);
    let params = ForestParams { n_trees: 100, ..ForestParams::default() };
    c.bench_function("forest_100_trees", |b| b.iter(|| fit_forest(black_box(&ds), &params, 42)));
}

criterion_group!(benches, bench_cart, bench_forest);
criterion_main!(benches);
