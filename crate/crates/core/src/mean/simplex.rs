//! Dense revised simplex for `min c^T y` subject to `A y = b`, `y >= 0`.
//!
//! Two phases with one artificial per row. The basis matrix is refactorized
//! at every pivot, which is cheap at the row counts used here (dimension + 1).

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpFailure {
    Singular,
    IterationLimit,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    /// Dual multipliers: `B^T pi = c_B` at the optimal basis.
    pub pi: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 50;
const PIVOT_TOL: f64 = 1e-11;

struct Tableau<'a> {
    a: &'a DMatrix<f64>,
    b: DVector<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau<'_> {
    fn structural(&self) -> usize {
        self.a.ncols()
    }

    fn column(&self, j: usize) -> DVector<f64> {
        let n = self.structural();
        if j < n {
            self.a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(self.a.nrows());
            e[j - n] = 1.0;
            e
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let rows = self.a.nrows();
        let mut bm = DMatrix::zeros(rows, rows);
        for (k, &j) in self.basis.iter().enumerate() {
            bm.set_column(k, &self.column(j));
        }
        bm
    }

    /// Runs one phase to optimality. Artificials never enter.
    fn run(
        &mut self,
        cost: &dyn Fn(usize) -> f64,
        phase_two: bool,
        max_iters: usize,
    ) -> Result<(DVector<f64>, DVector<f64>), LpFailure> {
        let rows = self.a.nrows();
        let n = self.structural();
        let scale = (0..n).map(|j| cost(j).abs()).fold(1.0, f64::max);
        let price_tol = 1e-11 * scale;
        let mut stall = 0usize;
        let mut bland = false;
        loop {
            let bm = self.basis_matrix();
            let lu = bm.clone().lu();
            let x_b = lu.solve(&self.b).ok_or(LpFailure::Singular)?;
            let c_b = DVector::from_iterator(rows, self.basis.iter().map(|&j| cost(j)));
            let pi = bm.transpose().lu().solve(&c_b).ok_or(LpFailure::Singular)?;

            let mut in_basis = vec![false; n + rows];
            for &j in &self.basis {
                in_basis[j] = true;
            }
            let mut entering = None;
            let mut best = -price_tol;
            for (j, &basic) in in_basis.iter().enumerate().take(n) {
                if basic {
                    continue;
                }
                let reduced = cost(j) - self.a.column(j).dot(&pi);
                if reduced < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = reduced;
                }
            }
            let Some(q) = entering else {
                return Ok((x_b, pi));
            };
            if self.iterations >= max_iters {
                return Err(LpFailure::IterationLimit);
            }
            self.iterations += 1;

            let dir = lu.solve(&self.column(q)).ok_or(LpFailure::Singular)?;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..rows {
                let artificial = self.basis[i] >= n;
                let ratio = if phase_two && artificial && dir[i].abs() > PIVOT_TOL {
                    0.0
                } else if dir[i] > PIVOT_TOL {
                    x_b[i].max(0.0) / dir[i]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((l, r)) => {
                        ratio < r - 1e-14 * r.abs().max(1e-300)
                            || (ratio <= r + 1e-14 * r.abs() && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((l, ratio)) = leave else {
                return Err(LpFailure::Unbounded);
            };
            self.basis[l] = q;
            if ratio <= 0.0 {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            } else {
                stall = 0;
            }
        }
    }
}

/// Solves the standard-form LP. Requires `b >= 0`.
pub(crate) fn solve_standard_form(
    a: &DMatrix<f64>,
    b: &[f64],
    cost: &[f64],
    max_iters: usize,
) -> Result<LpSolution, LpFailure> {
    let rows = a.nrows();
    let n = a.ncols();
    assert_eq!(b.len(), rows);
    assert_eq!(cost.len(), n);
    assert!(b.iter().all(|v| *v >= 0.0));
    let mut t = Tableau {
        a,
        b: DVector::from_column_slice(b),
        basis: (n..n + rows).collect(),
        iterations: 0,
    };

    let phase_one = |j: usize| if j < n { 0.0 } else { 1.0 };
    let (x_b, _) = t.run(&phase_one, false, max_iters)?;
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(x_b.iter())
        .filter(|(j, _)| **j >= n)
        .map(|(_, x)| x.max(0.0))
        .sum();
    let b_scale = b.iter().fold(1.0, |acc: f64, v| acc.max(v.abs()));
    if infeasibility > 1e-9 * b_scale {
        return Err(LpFailure::Infeasible);
    }

    let phase_two = |j: usize| if j < n { cost[j] } else { 0.0 };
    let (x_b, pi) = t.run(&phase_two, true, max_iters)?;
    let objective = t
        .basis
        .iter()
        .zip(x_b.iter())
        .map(|(&j, x)| phase_two(j) * x)
        .sum();
    Ok(LpSolution {
        pi: pi.iter().copied().collect(),
        objective,
        iterations: t.iterations,
    })
}
