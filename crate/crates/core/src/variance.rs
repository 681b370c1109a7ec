//! Blocked directional variance estimator and the spectral critical level.

use serde::{Deserialize, Serialize};

use crate::blocks::{pair_differences, plan_variance_blocks, planned_averages, BlockPlan};
use crate::error::{Error, Result};
use crate::matrix::{check_unit, Matrix};
use crate::numeric::CompensatedSum;

/// Which projections count as "largest" when trimming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrimMode {
    /// Largest `|<Z_j, u>|`; makes the estimate even in `u`.
    #[default]
    Absolute,
    /// Largest signed `<Z_j, u>`.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceConfig {
    pub gamma: f64,
    pub c1: f64,
    #[serde(rename = "theta_var")]
    pub theta: f64,
    pub c0: f64,
    pub trim_mode: TrimMode,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        VarianceConfig {
            gamma: 0.05,
            c1: 1.0,
            theta: 0.02,
            c0: 1.0,
            trim_mode: TrimMode::Absolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimator {
    /// Block averages of pairwise differences, one row per block.
    pub z: Matrix,
    pub theta: f64,
    pub trim_mode: TrimMode,
    pub plan: BlockPlan,
}

/// Pairs the first and second halves, plans blocks and averages them.
pub fn fit_variance(x: &Matrix, config: &VarianceConfig) -> Result<VarianceEstimator> {
    if x.rows() < 2 {
        return Err(Error::Sizing {
            what: "variance sample",
            got: x.rows(),
            minimal: 2,
        });
    }
    let diffs = pair_differences(x)?;
    let plan = match plan_variance_blocks(diffs.rows(), config.theta, config.gamma, config.c1) {
        Err(Error::Sizing { what, got, minimal }) => {
            return Err(Error::Sizing {
                what,
                got: 2 * got,
                minimal: 2 * minimal,
            })
        }
        other => other?,
    };
    Ok(VarianceEstimator {
        z: planned_averages(&diffs, &plan)?,
        theta: config.theta,
        trim_mode: config.trim_mode,
        plan,
    })
}

impl VarianceEstimator {
    pub fn dim(&self) -> usize {
        self.z.cols()
    }

    pub fn psi(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        check_unit(u)?;
        Ok(psi_from_projections(
            &self.z.project(u),
            self.plan.trim,
            self.trim_mode,
        ))
    }
}

/// `(1/(2n)) * sum p_j^2` after dropping the `trim` largest projections
/// (ties go to the smaller block index).
pub fn psi_from_projections(p: &[f64], trim: usize, mode: TrimMode) -> f64 {
    let n = p.len();
    if n == 0 {
        return 0.0;
    }
    let key = |j: usize| match mode {
        TrimMode::Absolute => p[j].abs(),
        TrimMode::Signed => p[j],
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut dropped = vec![false; n];
    if trim > 0 {
        let cmp = |a: &usize, b: &usize| key(*b).total_cmp(&key(*a)).then(a.cmp(b));
        order.select_nth_unstable_by(trim - 1, cmp);
        for &j in &order[..trim] {
            dropped[j] = true;
        }
    }
    let mut acc = CompensatedSum::default();
    for (j, v) in p.iter().enumerate() {
        if !dropped[j] {
            acc.add(v * v);
        }
    }
    acc.value() / (2 * n) as f64
}

/// `r = sqrt((c0/n) * sum_{i >= ceil(c0 n)} lambda_i)`, 1-based `i`; zero
/// when the threshold exceeds the dimension.
pub fn critical_level(eigenvalues: &[f64], n: usize, c0: f64) -> f64 {
    assert!(c0 > 0.0 && n >= 1);
    let start = (c0 * n as f64).ceil().max(1.0) as usize;
    if start > eigenvalues.len() {
        return 0.0;
    }
    let tail = crate::numeric::compensated_sum(eigenvalues[start - 1..].iter().copied());
    (c0 / n as f64 * tail).max(0.0).sqrt()
}
