//! Univariate trimmed statistics on a monotone nonincreasing rearrangement.
//!
//! Ties are broken by original index: among equal values the smaller index
//! counts as the larger value. Sums run in ascending original-index order
//! with compensated accumulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    pub values_desc: Vec<f64>,
    /// `values_desc[i] == values[perm[i]]`.
    pub perm: Vec<usize>,
}

/// Stable descending sort.
pub fn rearrange_desc(values: &[f64]) -> Result<SortedSample> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("values contain NaN"));
    }
    let mut perm: Vec<usize> = (0..values.len()).collect();
    perm.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("no NaN"));
    let values_desc = perm.iter().map(|&i| values[i]).collect();
    Ok(SortedSample { values_desc, perm })
}

/// Divisor used by [`trimmed_mean`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Divide by `N`.
    FullCount,
    /// Divide by the number of kept values `N - 2k`.
    InteriorCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimPlan {
    pub theta: f64,
    pub k: usize,
    /// Original indices of the `k` largest values, largest first.
    pub j_plus: Vec<usize>,
    /// Original indices of the `k` smallest values, smallest last.
    pub j_minus: Vec<usize>,
    pub sorted: SortedSample,
}

/// `k = round(theta * n)`, rejecting `k = 0` and `2k >= n`.
pub fn trim_count(n: usize, theta: f64) -> Result<usize> {
    if !(theta > 0.0 && theta < 0.5) {
        return Err(Error::invalid(format!("theta must lie in (0, 1/2), got {theta}")));
    }
    let k = (theta * n as f64).round() as usize;
    if k == 0 || 2 * k >= n {
        return Err(Error::invalid(format!(
            "sample of size {n} too small for theta = {theta} (trim count {k})"
        )));
    }
    Ok(k)
}

pub fn trim_sets(values: &[f64], theta: f64) -> Result<TrimPlan> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    let k = trim_count(values.len(), theta)?;
    let mut plan = TrimPlan::with_count(values, k)?;
    plan.theta = theta;
    Ok(plan)
}

impl TrimPlan {
    /// Trims exactly `k` per side; `k = 0` is the untrimmed degenerate mode.
    pub fn with_count(values: &[f64], k: usize) -> Result<Self> {
        let sorted = rearrange_desc(values)?;
        let n = values.len();
        if 2 * k >= n {
            return Err(Error::invalid(format!(
                "trim count {k} per side leaves nothing of {n} values"
            )));
        }
        Ok(TrimPlan {
            theta: k as f64 / n as f64,
            k,
            j_plus: sorted.perm[..k].to_vec(),
            j_minus: sorted.perm[n - k..].to_vec(),
            sorted,
        })
    }

    pub fn len(&self) -> usize {
        self.sorted.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.perm.is_empty()
    }

    /// `kept[i]` is false for indices in `J_+` or `J_-`.
    pub fn kept_mask(&self) -> Vec<bool> {
        let mut kept = vec![true; self.len()];
        for &i in self.j_plus.iter().chain(&self.j_minus) {
            kept[i] = false;
        }
        kept
    }

    fn interior_sum(&self, values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for (v, keep) in values.iter().zip(self.kept_mask()) {
            if keep {
                acc.add(f(*v));
            }
        }
        acc.value()
    }

    pub fn mean(&self, values: &[f64], normalization: Normalization) -> f64 {
        let n = self.len();
        let divisor = match normalization {
            Normalization::FullCount => n,
            Normalization::InteriorCount => n - 2 * self.k,
        };
        self.interior_sum(values, |v| v) / divisor as f64
    }

    pub fn abs_moment(&self, values: &[f64], p: f64) -> f64 {
        self.interior_sum(values, |v| v.abs().powf(p)) / self.len() as f64
    }

    /// `(k-th largest, k-th smallest)`; requires `k >= 1`.
    pub fn quantiles(&self) -> (f64, f64) {
        assert!(self.k >= 1, "quantiles need a positive trim count");
        let v = &self.sorted.values_desc;
        (v[self.k - 1], v[v.len() - self.k])
    }
}

pub fn trimmed_mean(values: &[f64], theta: f64, normalization: Normalization) -> Result<f64> {
    Ok(trim_sets(values, theta)?.mean(values, normalization))
}

/// `(1/N) * sum of |v|^p` over the untrimmed values.
pub fn trimmed_abs_moment(values: &[f64], p: f64, theta: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("moment order must be >= 1, got {p}")));
    }
    Ok(trim_sets(values, theta)?.abs_moment(values, p))
}

/// Empirical upper and lower trimming quantiles: the `k`-th largest and
/// the `k`-th smallest value, `k = round(theta * N)`.
pub fn empirical_quantile_hat(values: &[f64], theta: f64) -> Result<(f64, f64)> {
    Ok(trim_sets(values, theta)?.quantiles())
}
