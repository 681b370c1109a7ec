use dirmean::matrix::random_unit;
use dirmean::{
    directional_sigma, make_ground_truth, marginal_tail_prob, pair_differences, rng, sample_dataset,
    tail_eigensum, DistributionSpec,
};
use statrs::function::gamma::ln_gamma;

/// `E|t_nu|^q` in closed form.
fn student_abs_moment_closed(nu: f64, q: f64) -> f64 {
    (0.5 * q * nu.ln() + ln_gamma(0.5 * (q + 1.0)) + ln_gamma(0.5 * (nu - q))
        - 0.5 * std::f64::consts::PI.ln()
        - ln_gamma(0.5 * nu))
    .exp()
}

fn student_spec(nu: f64, q: f64, eig: Vec<f64>) -> DistributionSpec {
    let mut s = DistributionSpec::student(nu, eig);
    s.q_moment = Some(q);
    s
}

#[test]
fn student_kappa_matches_closed_form() {
    for (nu, q) in [(3.0, 2.5), (5.0, 4.0), (8.0, 3.0), (4.5, 2.2)] {
        let gt = make_ground_truth(&student_spec(nu, q, vec![2.0, 1.0])).unwrap();
        let want = student_abs_moment_closed(nu, q).powf(1.0 / q) * ((nu - 2.0) / nu).sqrt();
        assert!(
            (gt.kappa - want).abs() < 1e-8 * want,
            "nu {nu} q {q}: {} vs {want}",
            gt.kappa
        );
    }
}

#[test]
fn gaussian_kappa_matches_closed_form() {
    // E|g|^4 = 3.
    let mut s = DistributionSpec::gaussian(vec![1.0; 3]);
    s.q_moment = Some(4.0);
    let gt = make_ground_truth(&s).unwrap();
    assert!((gt.kappa - 3f64.powf(0.25)).abs() < 1e-12);
}

fn empirical_covariance(x: &dirmean::Matrix) -> Vec<Vec<f64>> {
    let (n, d) = (x.rows(), x.cols());
    let mut mean = vec![0.0; d];
    for row in x.iter_rows() {
        for k in 0..d {
            mean[k] += row[k] / n as f64;
        }
    }
    let mut c = vec![vec![0.0; d]; d];
    for row in x.iter_rows() {
        for a in 0..d {
            for b in 0..d {
                c[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]) / n as f64;
            }
        }
    }
    c
}

#[test]
fn sample_covariance_matches_ground_truth() {
    let specs = [
        DistributionSpec::gaussian(vec![3.0, 1.0, 0.5, 0.1]).with_rotation(11),
        student_spec(8.0, 3.0, vec![2.0, 1.0, 0.25, 0.25]).with_rotation(5),
    ];
    for spec in specs {
        let gt = make_ground_truth(&spec).unwrap();
        let ds = sample_dataset(&gt, 200_000, 17).unwrap();
        let c = empirical_covariance(&ds.x);
        for (a, row) in c.iter().enumerate() {
            for (b, got) in row.iter().enumerate() {
                let want = gt.covariance.row(a)[b];
                assert!((got - want).abs() < 0.04 * 3.0, "{a},{b}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn directional_sigma_matches_projection_spread() {
    let gt = make_ground_truth(&DistributionSpec::gaussian(vec![4.0, 1.0, 0.01]).with_rotation(2)).unwrap();
    let ds = sample_dataset(&gt, 100_000, 3).unwrap();
    let mut r = rng::stream(9, "test", 0);
    for _ in 0..5 {
        let u = random_unit(&mut r, 3);
        let p = ds.x.project(&u);
        let m = p.iter().sum::<f64>() / p.len() as f64;
        let sd = (p.iter().map(|v| (v - m).powi(2)).sum::<f64>() / p.len() as f64).sqrt();
        let want = directional_sigma(&gt, &u).unwrap();
        assert!((sd / want - 1.0).abs() < 0.02, "{sd} vs {want}");
    }
}

#[test]
fn pair_differences_double_the_covariance() {
    let gt = make_ground_truth(&DistributionSpec::gaussian(vec![1.0, 0.25])).unwrap();
    let ds = sample_dataset(&gt, 200_000, 4).unwrap();
    let z = pair_differences(&ds.x).unwrap();
    assert_eq!(z.rows(), 100_000);
    let c = empirical_covariance(&z);
    assert!((c[0][0] - 2.0).abs() < 0.05);
    assert!((c[1][1] - 0.5).abs() < 0.0125);
    assert!(c[0][1].abs() < 0.02);
}

#[test]
fn tail_probability_matches_frequency() {
    let gt = make_ground_truth(&student_spec(4.0, 3.0, vec![1.0, 1.0])).unwrap();
    let u = [1.0, 0.0];
    let ds = sample_dataset(&gt, 200_000, 6).unwrap();
    let p = ds.x.project(&u);
    for t in [0.5, 1.0, 2.0] {
        let freq = p.iter().filter(|&&v| v > t).count() as f64 / p.len() as f64;
        let want = marginal_tail_prob(&gt, &u, t).unwrap();
        let se = (want * (1.0 - want) / p.len() as f64).sqrt();
        assert!((freq - want).abs() < 5.0 * se, "t {t}: {freq} vs {want}");
    }
}

#[test]
fn tail_eigensum_sorted_descending() {
    let gt = make_ground_truth(&DistributionSpec::gaussian(vec![2.0, 1.0, 0.5])).unwrap();
    assert!(make_ground_truth(&DistributionSpec::gaussian(vec![0.5, 2.0])).is_err());
    assert!((tail_eigensum(&gt, 0).unwrap() - 3.5).abs() < 1e-12);
    assert!((tail_eigensum(&gt, 1).unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(tail_eigensum(&gt, 3).unwrap(), 0.0);
}

#[test]
fn spec_json_round_trip() {
    let spec = student_spec(3.0, 2.5, vec![1.0, 2.0])
        .with_mean(vec![1.0, -1.0])
        .with_rotation(4);
    let back = DistributionSpec::from_json(&spec.to_json()).unwrap();
    assert_eq!(spec, back);
    assert!(DistributionSpec::from_json(r#"{"family":"cauchy","eigenvalues":[1]}"#).is_err());
}

#[test]
fn same_seed_same_rows() {
    let gt = make_ground_truth(&DistributionSpec::gaussian(vec![1.0; 4]).with_rotation(1)).unwrap();
    assert_eq!(
        sample_dataset(&gt, 5000, 8).unwrap().x,
        sample_dataset(&gt, 5000, 8).unwrap().x
    );
    assert_ne!(
        sample_dataset(&gt, 5000, 8).unwrap().x,
        sample_dataset(&gt, 5000, 9).unwrap().x
    );
}
