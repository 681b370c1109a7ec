//! Trimmed marginal means, slab construction and the final mean estimate.

mod simplex;
mod solver;

pub use solver::{slab_objective, solve_center, Solution, SolverConfig};

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{plan_mean_blocks, planned_averages, trim_unit, BlockPlan};
use crate::error::{Error, Result};
use crate::matrix::{canonical, check_unit, dot, random_unit, Matrix};
use crate::numeric::median;
use crate::rng;
use crate::trimmed::{Normalization, TrimPlan};
use crate::variance::{fit_variance, VarianceConfig, VarianceEstimator};

/// Cosine above which two directions (or a direction and a negated one)
/// are treated as duplicates: an angular tolerance of `1e-6`.
const DUPLICATE_COS: f64 = 1.0 - 5e-13;
const EIGEN_DIRECTIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanConfig {
    pub theta: f64,
    pub c_blocks: f64,
    pub c_prime: f64,
    /// Slab direction budget; `None` means `max(8d, 256)`.
    pub budget: Option<usize>,
    pub refine_rounds: usize,
    pub probes_per_round: usize,
    pub refine_tol: f64,
    /// Worst probes appended to the system per refinement round.
    pub refine_append: usize,
    pub direction_seed: u64,
    pub variance: VarianceConfig,
    pub solver: SolverConfig,
}

impl Default for MeanConfig {
    fn default() -> Self {
        MeanConfig {
            theta: 0.125,
            c_blocks: 8.0,
            c_prime: 1.0,
            budget: None,
            refine_rounds: 3,
            probes_per_round: 512,
            refine_tol: 0.1,
            refine_append: 32,
            direction_seed: 0,
            variance: VarianceConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl MeanConfig {
    pub fn budget_for(&self, d: usize) -> usize {
        self.budget.unwrap_or((8 * d).max(256))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalMeanEstimator {
    /// Block averages of raw observations.
    pub y: Matrix,
    pub m: usize,
    pub theta: f64,
    pub plan: BlockPlan,
}

pub fn fit_marginal(x: &Matrix, delta: f64, config: &MeanConfig) -> Result<MarginalMeanEstimator> {
    let plan = plan_mean_blocks(x.rows(), delta, config.theta, config.c_blocks)?;
    Ok(MarginalMeanEstimator {
        y: planned_averages(x, &plan)?,
        m: plan.m,
        theta: config.theta,
        plan,
    })
}

impl MarginalMeanEstimator {
    pub fn dim(&self) -> usize {
        self.y.cols()
    }

    /// Interior-count trimmed mean of `<Y_j, u>`, divided by `sqrt(m)`.
    pub fn nu_hat(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        check_unit(u)?;
        Ok(self.nu_hat_unchecked(u))
    }

    fn nu_hat_unchecked(&self, u: &[f64]) -> f64 {
        let q = self.y.project(u);
        let plan = TrimPlan::with_count(&q, self.plan.trim).expect("plan keeps interior");
        plan.mean(&q, Normalization::InteriorCount) / (self.m as f64).sqrt()
    }
}

/// `2 C' sqrt(psi(u) ln(1/delta) / n)`.
pub fn slab_width(var: &VarianceEstimator, u: &[f64], delta: f64, c_prime: f64, n: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(width_from_psi(var.psi(u)?, delta, c_prime, n))
}

fn width_from_psi(psi: f64, delta: f64, c_prime: f64, n: usize) -> f64 {
    2.0 * c_prime * (psi * (1.0 / delta).ln() / n as f64).sqrt()
}

/// Finite direction set with marginal centers and half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabSystem {
    pub directions: Matrix,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub delta: f64,
    pub c_prime: f64,
}

impl SlabSystem {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    fn push(&mut self, u: &[f64], center: f64, width: f64) {
        self.directions.push_row(u);
        self.centers.push(center);
        self.widths.push(width);
    }
}

fn is_duplicate(set: &[Vec<f64>], u: &[f64]) -> bool {
    set.iter().any(|w| dot(w, u).abs() > DUPLICATE_COS)
}

/// Canonical basis, then leading eigenvectors of the block second-moment
/// matrix (when `var` is given), then seeded uniform directions up to
/// `budget`. Near-duplicates, including antipodal pairs, are skipped.
pub fn build_direction_set(
    d: usize,
    budget: usize,
    seed: u64,
    var: Option<&VarianceEstimator>,
) -> Result<Matrix> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if budget < 2 * d {
        return Err(Error::invalid(format!(
            "direction budget {budget} is below 2d = {}",
            2 * d
        )));
    }
    let mut set: Vec<Vec<f64>> = (0..d).map(|k| canonical(d, k)).collect();
    if let Some(var) = var {
        if var.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: var.dim(),
            });
        }
        let moment = var.z.second_moment();
        let top = moment.diagonal().iter().copied().fold(0.0, f64::max);
        if top > f64::MIN_POSITIVE {
            let eig = SymmetricEigen::new(moment);
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
            for &k in order.iter().take(d.min(EIGEN_DIRECTIONS)) {
                if eig.eigenvalues[k] <= 1e-12 * top {
                    break;
                }
                let mut u: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
                if !crate::matrix::normalize(&mut u) {
                    continue;
                }
                if !is_duplicate(&set, &u) && set.len() < budget {
                    set.push(u);
                }
            }
        }
    }
    let mut r = rng::stream(seed, "directions", 0);
    while set.len() < budget {
        let u = random_unit(&mut r, d);
        if !is_duplicate(&set, &u) {
            set.push(u);
        }
    }
    Matrix::from_vec(budget, d, set.concat())
}

/// Output of [`estimate_mean`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mu_hat: Vec<f64>,
    pub rho_star: f64,
    pub directions_used: usize,
    pub refinement_rounds: usize,
    /// Largest excess `|nu(u) - <mu_hat, u>| - w(u) - rho_star` over a fresh
    /// probe set, clamped at zero.
    pub probe_violation: f64,
    pub converged: bool,
    pub block_plan_mean: BlockPlan,
    pub block_plan_var: BlockPlan,
    pub iterations: usize,
    pub final_gap: Option<f64>,
}

/// Fitted pieces of the estimator, exposed for diagnostics.
pub struct Fitted {
    pub marginal: MarginalMeanEstimator,
    pub variance: VarianceEstimator,
    /// Rows per third.
    pub n: usize,
}

/// Splits the rows into thirds (dropping up to two trailing rows), fits the
/// marginal estimator on the first and the variance estimator on the rest.
/// Sizing errors are reported in total rows.
pub fn fit_parts(x: &Matrix, delta: f64, config: &MeanConfig) -> Result<Fitted> {
    let n = x.rows() / 3;
    let min_mean = plan_mean_blocks(usize::MAX, delta, config.theta, config.c_blocks)?.n;
    let min_var = trim_unit(config.variance.theta);
    let minimal = min_mean.max(min_var);
    if n < minimal {
        return Err(Error::Sizing {
            what: "mean estimate",
            got: x.rows(),
            minimal: 3 * minimal,
        });
    }
    let marginal = fit_marginal(&x.slice_rows(0, n), delta, config)?;
    let variance = fit_variance(&x.slice_rows(n, 3 * n), &config.variance)?;
    Ok(Fitted {
        marginal,
        variance,
        n,
    })
}

impl Fitted {
    fn slab(&self, u: &[f64], delta: f64, c_prime: f64) -> (f64, f64) {
        let center = self.marginal.nu_hat_unchecked(u);
        let psi = crate::variance::psi_from_projections(
            &self.variance.z.project(u),
            self.variance.plan.trim,
            self.variance.trim_mode,
        );
        (center, width_from_psi(psi, delta, c_prime, self.n))
    }

    pub fn slab_system(&self, directions: Matrix, delta: f64, c_prime: f64) -> SlabSystem {
        let (centers, widths) = (0..directions.rows())
            .into_par_iter()
            .map(|i| self.slab(directions.row(i), delta, c_prime))
            .unzip();
        SlabSystem {
            directions,
            centers,
            widths,
            delta,
            c_prime,
        }
    }

    /// Excess violations of `v` over `probes`, in probe order.
    fn violations(&self, probes: &[Vec<f64>], v: &[f64], rho: f64, delta: f64, c_prime: f64) -> Vec<f64> {
        probes
            .par_iter()
            .map(|u| {
                let (c, w) = self.slab(u, delta, c_prime);
                (c - dot(u, v)).abs() - w - rho
            })
            .collect()
    }
}

fn probe_set(seed: u64, round: usize, d: usize, count: usize) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, "probes", round as u64);
    (0..count).map(|_| random_unit(&mut r, d)).collect()
}

/// The full estimator on `3N` rows.
pub fn estimate_mean(x: &Matrix, delta: f64, config: &MeanConfig) -> Result<MeanEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let d = x.cols();
    let fitted = fit_parts(x, delta, config)?;
    let directions = build_direction_set(
        d,
        config.budget_for(d),
        config.direction_seed,
        Some(&fitted.variance),
    )?;
    let mut slabs = fitted.slab_system(directions, delta, config.c_prime);
    let warm: Vec<f64> = slabs.centers[..d].to_vec();
    let mut sol = solve_center(&slabs, &config.solver, &warm);
    let mut iterations = sol.iterations;

    let mut rounds = 0;
    for round in 0..config.refine_rounds {
        let probes = probe_set(config.direction_seed, round, d, config.probes_per_round);
        let viol = fitted.violations(&probes, &sol.v, sol.rho, delta, config.c_prime);
        let worst = viol.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let threshold = config.refine_tol * (sol.rho + median(&slabs.widths));
        if worst.partial_cmp(&threshold) != Some(std::cmp::Ordering::Greater) {
            break;
        }
        let mut order: Vec<usize> = (0..probes.len()).collect();
        order.sort_by(|&a, &b| viol[b].total_cmp(&viol[a]).then(a.cmp(&b)));
        for &i in order.iter().take(config.refine_append) {
            if viol[i] <= 0.0 {
                break;
            }
            let (c, w) = fitted.slab(&probes[i], delta, config.c_prime);
            slabs.push(&probes[i], c, w);
        }
        sol = solve_center(&slabs, &config.solver, &sol.v);
        iterations += sol.iterations;
        rounds += 1;
    }

    let probes = probe_set(
        config.direction_seed,
        config.refine_rounds,
        d,
        config.probes_per_round,
    );
    let probe_violation = fitted
        .violations(&probes, &sol.v, sol.rho, delta, config.c_prime)
        .into_iter()
        .fold(0.0, f64::max);

    Ok(MeanEstimate {
        mu_hat: sol.v,
        rho_star: sol.rho,
        directions_used: slabs.len(),
        refinement_rounds: rounds,
        probe_violation,
        converged: sol.converged,
        block_plan_mean: fitted.marginal.plan,
        block_plan_var: fitted.variance.plan,
        iterations,
        final_gap: sol.final_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{make_ground_truth, sample_dataset, DistributionSpec};

    #[test]
    fn nu_hat_small_example() {
        // m = 4, three blocks with projections 10, 0, -10.
        let y = Matrix::from_rows(&[vec![10.0], vec![0.0], vec![-10.0]]).unwrap();
        let est = MarginalMeanEstimator {
            y,
            m: 4,
            theta: 1.0 / 3.0,
            plan: BlockPlan {
                m: 4,
                n: 3,
                used: 12,
                discarded: 0,
                trim: 1,
            },
        };
        assert_eq!(est.nu_hat(&[1.0]).unwrap(), 0.0);
        assert!(est.nu_hat(&[0.5]).is_err());
    }

    #[test]
    fn marginal_plan_and_constant_rows() {
        let x = Matrix::from_rows(&vec![vec![0.5, -2.0]; 10_000]).unwrap();
        let est = fit_marginal(&x, 0.01, &MeanConfig::default()).unwrap();
        assert_eq!((est.plan.n, est.plan.m, est.plan.discarded), (48, 208, 16));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = est.nu_hat(&[s, s]).unwrap();
        assert!((v - (0.5 - 2.0) * s).abs() < 1e-12);
    }

    #[test]
    fn width_examples() {
        assert_eq!(width_from_psi(0.0, 0.1, 1.0, 100), 0.0);
        let e = (-1.0f64).exp();
        assert!((width_from_psi(1.0, e, 1.0, 100) - 0.2).abs() < 1e-15);
        let a = width_from_psi(1.0, 0.1, 1.0, 100);
        let b = width_from_psi(1.0, 0.01, 1.0, 100);
        assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn direction_set_basics() {
        let set = build_direction_set(2, 4, 1, None).unwrap();
        assert_eq!(set.rows(), 4);
        assert_eq!(set.row(0), &[1.0, 0.0]);
        assert_eq!(set.row(1), &[0.0, 1.0]);
        for u in set.iter_rows() {
            assert!(check_unit(u).is_ok());
        }
        assert_eq!(set, build_direction_set(2, 4, 1, None).unwrap());
        assert!(build_direction_set(3, 5, 1, None).is_err());
    }

    #[test]
    fn constant_dataset() {
        let v = vec![1.5, -0.25, 3.0];
        let x = Matrix::from_rows(&vec![v.clone(); 450]).unwrap();
        let est = estimate_mean(&x, 0.01, &MeanConfig::default()).unwrap();
        for (a, b) in est.mu_hat.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(est.rho_star < 1e-12);
    }

    #[test]
    fn sizing_error_in_total_rows() {
        let x = Matrix::zeros(120, 2);
        match estimate_mean(&x, 0.01, &MeanConfig::default()) {
            Err(Error::Sizing { got, minimal, .. }) => assert_eq!((got, minimal), (120, 150)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn replay_bound_and_determinism() {
        let gt = make_ground_truth(&DistributionSpec::student(3.0, vec![4.0, 1.0, 1.0])).unwrap();
        let ds = sample_dataset(&gt, 3000, 5).unwrap();
        let cfg = MeanConfig::default();
        let a = estimate_mean(&ds.x, 0.05, &cfg).unwrap();
        let b = estimate_mean(&ds.x, 0.05, &cfg).unwrap();
        assert_eq!(a, b);
        let fitted = fit_parts(&ds.x, 0.05, &cfg).unwrap();
        let dirs =
            build_direction_set(3, cfg.budget_for(3), cfg.direction_seed, Some(&fitted.variance)).unwrap();
        let slabs = fitted.slab_system(dirs, 0.05, cfg.c_prime);
        let g = slab_objective(&slabs, &a.mu_hat);
        assert!(g <= a.rho_star + 1e-8 * (1.0 + a.rho_star));
    }
}
