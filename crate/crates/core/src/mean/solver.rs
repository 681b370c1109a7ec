//! Minimax center of a finite slab system.
//!
//! Minimizes `g(v) = max_i (|c_i - <v, u_i>| - w_i)`. A short subgradient
//! warmup is followed by an exact linear-programming solve of the dual
//! problem. When the minimizers of `g` form a face, a second solve picks
//! the one nearest the warm start in the max norm, so the returned point
//! moves with the data under translation. The result is never worse than
//! the warm start.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::simplex::{solve_standard_form, LpFailure};
use super::SlabSystem;
use crate::matrix::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Subgradient iterations before the exact solve.
    pub warmup_iters: usize,
    /// Subgradient budget when `exact` is off; pivot budget for the LP.
    pub max_iters: usize,
    /// Relative tolerance on the duality gap.
    pub tol: f64,
    /// Solve the LP after the warmup.
    pub exact: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            warmup_iters: 200,
            max_iters: 5000,
            tol: 1e-8,
            exact: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub v: Vec<f64>,
    /// `max(g(v), 0)`.
    pub rho: f64,
    /// `g(v)`, which may be negative when the slabs overlap.
    pub objective: f64,
    pub iterations: usize,
    /// `g(v)` minus a certified lower bound on `min g`; `None` without one.
    pub final_gap: Option<f64>,
    pub converged: bool,
}

/// `g(v)` by direct replay of every constraint.
pub fn slab_objective(slabs: &SlabSystem, v: &[f64]) -> f64 {
    (0..slabs.len())
        .map(|i| (slabs.centers[i] - dot(slabs.directions.row(i), v)).abs() - slabs.widths[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn active_subgradient(slabs: &SlabSystem, v: &[f64]) -> (f64, Vec<f64>) {
    let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
    for i in 0..slabs.len() {
        let r = slabs.centers[i] - dot(slabs.directions.row(i), v);
        let val = r.abs() - slabs.widths[i];
        if val > best.0 {
            best = (val, i, r);
        }
    }
    let (val, i, r) = best;
    let sign = if r >= 0.0 { -1.0 } else { 1.0 };
    (val, slabs.directions.row(i).iter().map(|x| sign * x).collect())
}

fn subgradient(slabs: &SlabSystem, start: &[f64], iters: usize) -> (Vec<f64>, f64) {
    let mut v = start.to_vec();
    let mut best_v = v.clone();
    let (mut best_g, _) = active_subgradient(slabs, &v);
    let scale = best_g.abs().max(1e-12 * (1.0 + crate::matrix::norm(start)));
    for t in 1..=iters {
        let (g, s) = active_subgradient(slabs, &v);
        if g < best_g {
            best_g = g;
            best_v.clone_from(&v);
        }
        let step = scale / (t as f64).sqrt();
        for (x, si) in v.iter_mut().zip(&s) {
            *x -= step * si;
        }
    }
    let g = slab_objective(slabs, &v);
    if g < best_g {
        return (v, g);
    }
    (best_v, best_g)
}

/// Orthonormal basis (as columns) of the span of the directions, or `None`
/// when they already span the whole space.
fn span_basis(slabs: &SlabSystem) -> Option<DMatrix<f64>> {
    let d = slabs.directions.cols();
    let gram = DMatrix::from_fn(d, d, |a, b| {
        slabs.directions.iter_rows().map(|u| u[a] * u[b]).sum::<f64>()
    });
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..d)
        .filter(|&k| eig.eigenvalues[k] > 1e-10 * top.max(f64::MIN_POSITIVE))
        .collect();
    if keep.len() == d {
        return None;
    }
    let mut basis = DMatrix::zeros(d, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(k));
    }
    Some(basis)
}

/// Exact minimizer through the dual LP
/// `min sum y_is (w_i - s c_i)` s.t. `sum y_is s u_i = 0`, `sum y_is = 1`, `y >= 0`.
///
/// With `anchor = Some(eps)` the primal objective becomes
/// `g(v) + eps * max_k |v_k - warm_k|` (in span coordinates), which picks
/// the minimizer of `g` nearest the warm start when the minimizers form a
/// face. The returned bound is only meaningful without an anchor.
fn exact_solve(
    slabs: &SlabSystem,
    warm: &[f64],
    anchor: Option<f64>,
    max_iters: usize,
) -> Result<(Vec<f64>, f64, usize), LpFailure> {
    let d = slabs.directions.cols();
    let basis = span_basis(slabs);
    let r = basis.as_ref().map_or(d, |b| b.ncols());
    let reduced = |u: &[f64]| -> Vec<f64> {
        match &basis {
            None => u.to_vec(),
            Some(b) => (0..r).map(|c| dot(b.column(c).as_slice(), u)).collect(),
        }
    };
    let m = slabs.len();
    let (rows, cols) = match anchor {
        None => (r + 1, 2 * m),
        Some(_) => (r + 2, 2 * m + 2 * r),
    };
    let mut a = DMatrix::zeros(rows, cols);
    let mut cost = vec![0.0; cols];
    for i in 0..m {
        let ur = reduced(slabs.directions.row(i));
        for (k, s) in [1.0, -1.0].into_iter().enumerate() {
            let col = 2 * i + k;
            for c in 0..r {
                a[(c, col)] = s * ur[c];
            }
            a[(r, col)] = 1.0;
            cost[col] = slabs.widths[i] - s * slabs.centers[i];
        }
    }
    let mut b = vec![0.0; rows];
    b[r] = 1.0;
    if let Some(eps) = anchor {
        // Columns for `sigma (v_k - warm_k) <= s`, row `r + 1` carries `s`.
        let wr = reduced(warm);
        for c in 0..r {
            for (k, sigma) in [1.0, -1.0].into_iter().enumerate() {
                let col = 2 * m + 2 * c + k;
                a[(c, col)] = -sigma;
                a[(r + 1, col)] = 1.0;
                cost[col] = sigma * wr[c];
            }
        }
        b[r + 1] = eps;
    }
    let sol = solve_standard_form(&a, &b, &cost, max_iters)?;
    let v_red: Vec<f64> = sol.pi[..r].iter().map(|p| -p).collect();
    let v = match &basis {
        None => v_red,
        Some(bm) => {
            // Span component from the LP, orthogonal component from the warm start.
            let mut v = warm.to_vec();
            for (c, target) in v_red.iter().enumerate() {
                let col = bm.column(c);
                let w = dot(col.as_slice(), warm);
                for (x, e) in v.iter_mut().zip(col.iter()) {
                    *x += (target - w) * e;
                }
            }
            v
        }
    };
    Ok((v, -sol.objective, sol.iterations))
}

/// Anchor weight relative to the cost scale: far above the pricing
/// tolerance, far below the slope of `g` away from its minimizers.
const ANCHOR_WEIGHT: f64 = 1e-7;

/// Minimizes the slab objective starting from `warm`.
pub fn solve_center(slabs: &SlabSystem, config: &SolverConfig, warm: &[f64]) -> Solution {
    assert_eq!(warm.len(), slabs.directions.cols());
    if slabs.is_empty() {
        return Solution {
            v: warm.to_vec(),
            rho: 0.0,
            objective: f64::NEG_INFINITY,
            iterations: 0,
            final_gap: None,
            converged: true,
        };
    }
    let warm_g = slab_objective(slabs, warm);
    let sub_iters = if config.exact {
        config.warmup_iters
    } else {
        config.max_iters
    };
    let (sub_v, sub_g) = subgradient(slabs, warm, sub_iters);

    let mut lower = None;
    let mut lp_iters = 0;
    let mut lp_point = None;
    if config.exact {
        let budget = config.max_iters.max(20 * (slabs.len() + warm.len()));
        if let Ok((v, bound, iters)) = exact_solve(slabs, warm, None, budget) {
            let g = slab_objective(slabs, &v);
            lower = Some(bound);
            lp_iters = iters;
            let slack = config.tol * (1.0 + g.abs());
            let scale = slabs
                .centers
                .iter()
                .chain(&slabs.widths)
                .chain(warm)
                .fold(1.0, |acc: f64, x| acc.max(x.abs()));
            lp_point = Some((v, g));
            if let Ok((va, _, iters)) = exact_solve(slabs, warm, Some(ANCHOR_WEIGHT * scale), budget) {
                lp_iters += iters;
                let ga = slab_objective(slabs, &va);
                if ga <= g + slack {
                    lp_point = Some((va, ga));
                }
            }
        }
    }
    let lp_ok = lp_point.is_some();
    // The LP point wins unless the subgradient iterate is clearly better;
    // the warm start wins whenever it is strictly better.
    let (mut v, mut g) = match lp_point {
        Some((v, g)) if sub_g >= g - config.tol * (1.0 + g.abs()) => (v, g),
        _ => (sub_v, sub_g),
    };
    if warm_g < g {
        v = warm.to_vec();
        g = warm_g;
    }

    let final_gap = lower.map(|lb| g - lb);
    let converged = match final_gap {
        Some(gap) => lp_ok && gap <= config.tol * (1.0 + g.abs()),
        None => false,
    };
    Solution {
        rho: g.max(0.0),
        objective: g,
        iterations: sub_iters + lp_iters,
        final_gap,
        converged,
        v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn system(dirs: &[Vec<f64>], centers: &[f64], widths: &[f64]) -> SlabSystem {
        SlabSystem {
            directions: Matrix::from_rows(dirs).unwrap(),
            centers: centers.to_vec(),
            widths: widths.to_vec(),
            delta: 0.01,
            c_prime: 1.0,
        }
    }

    #[test]
    fn unique_intersection() {
        let s = system(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 2.0], &[0.0, 0.0]);
        let sol = solve_center(&s, &SolverConfig::default(), &[0.0, 0.0]);
        assert!((sol.v[0] - 1.0).abs() < 1e-12 && (sol.v[1] - 2.0).abs() < 1e-12);
        assert!(sol.rho < 1e-12);
        assert!(sol.converged);
    }

    #[test]
    fn conflicting_midpoint() {
        let s = system(&[vec![1.0], vec![1.0]], &[0.0, 2.0], &[0.0, 0.0]);
        let sol = solve_center(&s, &SolverConfig::default(), &[0.0]);
        assert!((sol.v[0] - 1.0).abs() < 1e-12);
        assert!((sol.rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_keeps_warm_orthogonal_part() {
        let s = system(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[0.0, 2.0], &[0.5, 0.5]);
        let sol = solve_center(&s, &SolverConfig::default(), &[0.3, 7.0]);
        assert!((sol.v[0] - 1.0).abs() < 1e-12);
        assert_eq!(sol.v[1], 7.0);
        assert!((sol.rho - 0.5).abs() < 1e-12);
    }

    #[test]
    fn subgradient_only_improves_on_warm_start() {
        let s = system(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 2.0], &[0.1, 0.1]);
        let cfg = SolverConfig {
            exact: false,
            ..SolverConfig::default()
        };
        let sol = solve_center(&s, &cfg, &[5.0, -5.0]);
        assert!(sol.objective <= slab_objective(&s, &[5.0, -5.0]));
        assert!(sol.objective < 0.01);
    }
}
