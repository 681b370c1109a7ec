use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dirmean::harness::median_of_means;
use dirmean::matrix::random_unit;
use dirmean::{
    estimate_mean, fit_variance, make_ground_truth, rng, sample_dataset, solve_center, trimmed_mean,
    DistributionSpec, Matrix, MeanConfig, Normalization, SlabSystem, SolverConfig, VarianceConfig,
};

fn rows(d: usize, n: usize) -> Matrix {
    let gt = make_ground_truth(&DistributionSpec::student(4.0, vec![1.0; d])).unwrap();
    sample_dataset(&gt, n, 1).unwrap().x
}

fn trimmed(c: &mut Criterion) {
    let x = rows(1, 10_000);
    let values = x.as_slice().to_vec();
    c.bench_function("trimmed_mean/10k", |b| {
        b.iter(|| trimmed_mean(black_box(&values), 0.05, Normalization::InteriorCount).unwrap())
    });
}

fn variance(c: &mut Criterion) {
    let x = rows(20, 40_000);
    let est = fit_variance(&x, &VarianceConfig::default()).unwrap();
    let u = random_unit(&mut rng::stream(0, "bench", 0), 20);
    c.bench_function("fit_variance/d20/40k", |b| {
        b.iter(|| fit_variance(black_box(&x), &VarianceConfig::default()).unwrap())
    });
    c.bench_function("psi/d20", |b| b.iter(|| est.psi(black_box(&u)).unwrap()));
}

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_center");
    for d in [5usize, 20, 50] {
        let mut r = rng::stream(d as u64, "bench-slabs", 0);
        let m = (8 * d).max(256);
        let dirs: Vec<Vec<f64>> = (0..m).map(|_| random_unit(&mut r, d)).collect();
        let centers = dirs.iter().map(|u| u[0] * 0.1).collect();
        let slabs = SlabSystem {
            directions: Matrix::from_rows(&dirs).unwrap(),
            centers,
            widths: vec![0.05; m],
            delta: 0.01,
            c_prime: 1.0,
        };
        let warm = vec![0.0; d];
        group.bench_with_input(BenchmarkId::from_parameter(d), &slabs, |b, s| {
            b.iter(|| solve_center(s, &SolverConfig::default(), &warm))
        });
    }
    group.finish();
}

fn end_to_end(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate");
    group.sample_size(10);
    for d in [5usize, 20] {
        let x = rows(d, 30_000);
        group.bench_with_input(BenchmarkId::new("dirmean", d), &x, |b, x| {
            b.iter(|| estimate_mean(x, 0.01, &MeanConfig::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("median_of_means", d), &x, |b, x| {
            b.iter(|| median_of_means(x, 45).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trimmed, variance, solver, end_to_end);
criterion_main!(benches);
