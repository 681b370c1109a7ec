use dirmean::matrix::random_unit;
use dirmean::mean::fit_parts;
use dirmean::{
    build_direction_set, estimate_mean, make_ground_truth, rng, sample_dataset, slab_width, solve_center,
    DistributionSpec, Matrix, MeanConfig, SlabSystem, SolverConfig,
};
use proptest::prelude::*;
use rand::Rng;

fn gaussian_rows(d: usize, rows: usize, seed: u64) -> Matrix {
    let eig: Vec<f64> = (1..=d).map(|i| 1.0 / i as f64).collect();
    let gt = make_ground_truth(&DistributionSpec::gaussian(eig).with_rotation(seed)).unwrap();
    sample_dataset(&gt, rows, seed).unwrap().x
}

fn replay(s: &SlabSystem, v: &[f64]) -> f64 {
    (0..s.centers.len())
        .map(|i| {
            let p: f64 = s.directions.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
            (s.centers[i] - p).abs() - s.widths[i]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn translation_moves_estimate_by_shift() {
    let x = gaussian_rows(4, 3000, 1);
    let shift = [10.0, -3.0, 0.5, 1e3];
    let cfg = MeanConfig::default();
    let a = estimate_mean(&x, 0.05, &cfg).unwrap();
    let b = estimate_mean(&x.translated(&shift), 0.05, &cfg).unwrap();
    for (k, s) in shift.iter().enumerate() {
        let diff = b.mu_hat[k] - a.mu_hat[k] - s;
        assert!(diff.abs() < 1e-9 * (1.0 + s.abs()), "coordinate {k}: {diff}");
    }
    assert!((a.rho_star - b.rho_star).abs() < 1e-9);
}

#[test]
fn identical_inputs_identical_bytes() {
    let x = gaussian_rows(3, 3000, 2);
    let cfg = MeanConfig::default();
    let a = estimate_mean(&x, 0.05, &cfg).unwrap();
    let b = estimate_mean(&x, 0.05, &cfg).unwrap();
    let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.mu_hat), bits(&b.mu_hat));
}

#[test]
fn estimate_satisfies_its_own_slabs() {
    let x = gaussian_rows(5, 6000, 3);
    let delta = 0.05;
    let cfg = MeanConfig::default();
    let est = estimate_mean(&x, delta, &cfg).unwrap();
    let fitted = fit_parts(&x, delta, &cfg).unwrap();
    let dirs = build_direction_set(5, cfg.budget_for(5), cfg.direction_seed, Some(&fitted.variance)).unwrap();
    let slabs = fitted.slab_system(dirs, delta, cfg.c_prime);
    assert!(replay(&slabs, &est.mu_hat) <= est.rho_star + 1e-8 * (1.0 + est.rho_star));
    let u = [1.0, 0.0, 0.0, 0.0, 0.0];
    let w = slab_width(&fitted.variance, &u, delta, cfg.c_prime, fitted.n).unwrap();
    assert!(w > 0.0 && w.is_finite());
}

#[test]
fn nu_hat_is_odd() {
    let x = gaussian_rows(3, 3000, 4);
    let fitted = fit_parts(&x, 0.05, &MeanConfig::default()).unwrap();
    let mut r = rng::stream(4, "test", 0);
    for _ in 0..20 {
        let u = random_unit(&mut r, 3);
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        assert_eq!(
            fitted.marginal.nu_hat(&u).unwrap(),
            -fitted.marginal.nu_hat(&neg).unwrap()
        );
    }
}

#[test]
fn estimate_close_to_truth() {
    let d = 5;
    let x = gaussian_rows(d, 30_000, 5);
    let est = estimate_mean(&x, 0.01, &MeanConfig::default()).unwrap();
    let err: f64 = est.mu_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    // Every coordinate variance is at most 1; the mean of 10^4 rows sits
    // within a few hundredths.
    assert!(err < 0.1, "error norm {err}");
    assert!(est.converged);
}

fn random_system(r: &mut impl Rng, d: usize, m: usize) -> SlabSystem {
    let mut rows = Vec::new();
    let mut centers = Vec::new();
    let mut widths = Vec::new();
    for _ in 0..m {
        rows.push(random_unit(r, d));
        centers.push(r.random_range(-2.0..2.0));
        widths.push(r.random_range(0.0..0.3));
    }
    SlabSystem {
        directions: Matrix::from_rows(&rows).unwrap(),
        centers,
        widths,
        delta: 0.01,
        c_prime: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_never_worse_than_warm_start(seed in any::<u64>(), d in 1usize..6, m in 1usize..40) {
        let mut r = rng::stream(seed, "system", 0);
        let s = random_system(&mut r, d, m);
        let warm: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let sol = solve_center(&s, &SolverConfig::default(), &warm);
        prop_assert!(replay(&s, &sol.v) <= replay(&s, &warm) + 1e-12);
        prop_assert!((sol.rho - replay(&s, &sol.v).max(0.0)).abs() <= 1e-9);
    }

    #[test]
    fn more_slabs_never_lower_value(seed in any::<u64>(), d in 1usize..5, m in 2usize..30) {
        let mut r = rng::stream(seed, "system", 1);
        let s = random_system(&mut r, d, m);
        let mut sub = s.clone();
        let keep = m / 2;
        sub.directions = s.directions.slice_rows(0, keep);
        sub.centers.truncate(keep);
        sub.widths.truncate(keep);
        let cfg = SolverConfig::default();
        let full = solve_center(&s, &cfg, &vec![0.0; d]);
        let part = solve_center(&sub, &cfg, &vec![0.0; d]);
        prop_assert!(full.objective >= part.objective - 1e-8);
    }
}
