//! Empirical checks of the ratio, quantile and small-ball properties that
//! the estimator's guarantees rest on.
//!
//! The checks over `t` and over intervals are exact suprema for continuous
//! oracles: between consecutive sample points the empirical measure is
//! constant and the true tail is monotone, so extremes sit at segment ends.

mod small_ball;

pub use small_ball::{small_ball_check, SmallBallConfig, SmallBallReport};

use serde::{Deserialize, Serialize};

use crate::distributions::{directional_sigma, Family, GroundTruth, MarginalLaw};
use crate::error::{Error, Result};
use crate::matrix::{random_unit, Matrix};
use crate::rng;
use crate::trimmed::empirical_quantile_hat;

/// Continuous one-dimensional law.
pub trait MarginalOracle: Sync {
    fn cdf(&self, x: f64) -> f64;
    /// `P{Z > x}`.
    fn sf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> f64;
}

impl MarginalOracle for MarginalLaw {
    fn cdf(&self, x: f64) -> f64 {
        MarginalLaw::cdf(self, x)
    }
    fn sf(&self, x: f64) -> f64 {
        MarginalLaw::sf(self, x)
    }
    fn quantile(&self, p: f64) -> f64 {
        MarginalLaw::quantile(self, p)
    }
}

/// Law of `-Z`.
struct Mirrored<'a, O: ?Sized>(&'a O);

impl<O: MarginalOracle + ?Sized> MarginalOracle for Mirrored<'_, O> {
    fn cdf(&self, x: f64) -> f64 {
        self.0.sf(-x)
    }
    fn sf(&self, x: f64) -> f64 {
        self.0.cdf(-x)
    }
    fn quantile(&self, p: f64) -> f64 {
        -self.0.quantile(1.0 - p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    /// Largest `|P_N/P - 1| - 2^{-j/2-1}` over the admissible `(j, t)`;
    /// `None` when no pair is admissible.
    pub prop1_worst: Option<f64>,
    /// `sup_I (P_N(I) - 1.5 P(I)) - 2 delta`.
    pub prop2_worst: f64,
    pub prop3_ok: bool,
    pub delta: f64,
    pub theta: f64,
    pub eta: f64,
    pub holds: bool,
}

impl PropertyReport {
    pub fn prop1_ok(&self) -> bool {
        self.prop1_worst.is_none_or(|w| w <= 0.0)
    }

    pub fn prop2_ok(&self) -> bool {
        self.prop2_worst <= 0.0
    }
}

fn sorted_ascending(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::Empty("sample"));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sample values must be finite"));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Worst property-(1) margin for the upper tail of `sorted` (ascending).
fn upper_tail_margin<O: MarginalOracle + ?Sized>(sorted: &[f64], oracle: &O, delta: f64) -> Option<f64> {
    let n = sorted.len() as f64;
    let levels = (1.0 / delta).log2().ceil().max(0.0) as i32;
    let mut worst: Option<f64> = None;
    let mut record = |ratio: f64, allowed: f64| {
        let m = (ratio - 1.0).abs() - allowed;
        worst = Some(worst.map_or(m, |w: f64| w.max(m)));
    };
    for j in 0..=levels {
        let level = 2f64.powi(j) * delta;
        if level >= 1.0 || oracle.sf(0.0) < level {
            continue;
        }
        let allowed = 2f64.powf(-(j as f64) / 2.0 - 1.0);
        let top = oracle.quantile(1.0 - level).max(0.0);
        // Number of sample points <= t, advanced as t crosses sample values.
        let mut below = sorted.partition_point(|v| *v <= 0.0);
        let emp = |below: usize| (sorted.len() - below) as f64 / n;
        record(emp(below) / oracle.sf(0.0), allowed);
        while below < sorted.len() && sorted[below] <= top {
            let s = sorted[below];
            let p = oracle.sf(s);
            record(emp(below) / p, allowed);
            while below < sorted.len() && sorted[below] == s {
                below += 1;
            }
            record(emp(below) / p, allowed);
        }
        record(emp(below) / oracle.sf(top), allowed);
    }
    worst
}

/// `sup over intervals of P_N(I) - 1.5 P(I)`, exact in `O(N)` after sorting.
fn interval_excess<O: MarginalOracle + ?Sized>(sorted: &[f64], oracle: &O) -> f64 {
    let n = sorted.len() as f64;
    let mut best = 0.0f64;
    let mut min_left = f64::INFINITY;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let f = oracle.cdf(v);
        // Interval may start at this group: count strictly below it.
        min_left = min_left.min(i as f64 / n - 1.5 * f);
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
        best = best.max(i as f64 / n - 1.5 * f - min_left);
    }
    best
}

/// All-pairs reference for [`interval_excess`].
pub fn interval_excess_brute_force<O: MarginalOracle + ?Sized>(sample: &[f64], oracle: &O) -> f64 {
    let n = sample.len() as f64;
    let mut best = 0.0f64;
    for &a in sample {
        for &b in sample {
            if a > b {
                continue;
            }
            let count = sample.iter().filter(|v| **v >= a && **v <= b).count() as f64;
            best = best.max(count / n - 1.5 * (oracle.cdf(b) - oracle.cdf(a)));
        }
    }
    best
}

/// Checks the three ratio properties on a sample against its exact law.
pub fn check_ratio_properties<O: MarginalOracle + ?Sized>(
    sample: &[f64],
    oracle: &O,
    delta: f64,
    theta: f64,
) -> Result<PropertyReport> {
    if !(delta > 0.0 && delta < 1.0 && theta > 0.0 && theta < 0.5) {
        return Err(Error::invalid(format!(
            "need delta in (0,1) and theta in (0,1/2), got {delta}, {theta}"
        )));
    }
    let sorted = sorted_ascending(sample)?;
    let mirrored: Vec<f64> = sorted.iter().rev().map(|v| -v).collect();
    let upper = upper_tail_margin(&sorted, oracle, delta);
    let lower = upper_tail_margin(&mirrored, &Mirrored(oracle), delta);
    let prop1_worst = match (upper, lower) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    let prop2_worst = interval_excess(&sorted, oracle) - 2.0 * delta;
    let eta = 4.0 * theta + 16.0 * delta;
    let prop3_ok = oracle.sf(0.0) >= eta && oracle.cdf(0.0) >= eta;
    let mut report = PropertyReport {
        prop1_worst,
        prop2_worst,
        prop3_ok,
        delta,
        theta,
        eta,
        holds: false,
    };
    report.holds = report.prop1_ok() && report.prop2_ok() && prop3_ok;
    Ok(report)
}

/// `(theta1, theta2) = (2 theta + 8 delta, (2 theta - 8 delta) / 3)`.
pub fn sandwich_levels(theta: f64, delta: f64) -> Result<(f64, f64)> {
    if theta < 7.0 * delta * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "need theta >= 7 delta, got {theta} < 7 * {delta}"
        )));
    }
    let theta1 = 2.0 * theta + 8.0 * delta;
    let theta2 = (2.0 * theta - 8.0 * delta) / 3.0;
    if theta2 <= 0.0 || theta1 >= 1.0 {
        return Err(Error::invalid(format!(
            "sandwich levels ({theta1}, {theta2}) are infeasible"
        )));
    }
    Ok((theta1, theta2))
}

/// `Q_{1-theta1} < Qhat_+ < Q_{1-theta2}` and `Q_{theta2} < Qhat_- < Q_{theta1}`.
pub fn quantile_sandwich_check<O: MarginalOracle + ?Sized>(
    sample: &[f64],
    oracle: &O,
    theta: f64,
    delta: f64,
) -> Result<bool> {
    let (theta1, theta2) = sandwich_levels(theta, delta)?;
    let (q_plus, q_minus) = empirical_quantile_hat(sample, theta)?;
    let upper = oracle.quantile(1.0 - theta1) < q_plus && q_plus < oracle.quantile(1.0 - theta2);
    let lower = oracle.quantile(theta2) < q_minus && q_minus < oracle.quantile(theta1);
    Ok(upper && lower)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionMargins {
    pub index: usize,
    pub direction: Vec<f64>,
    /// Standard deviation of the projected block law.
    pub sigma: f64,
    pub prop_a_worst: Option<f64>,
    pub prop_b_worst: f64,
    pub pass: bool,
}

/// Sampled-direction surrogate of the uniform ratio bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub delta: f64,
    pub r_used: f64,
    pub directions: Vec<DirectionMargins>,
    pub pass_fraction: f64,
}

/// Runs the tail-ratio and interval checks on `<Z_j, u>` for `n_dirs`
/// seeded directions with block standard deviation at least `r`. `z` holds
/// block averages of pairwise differences, whose projections follow
/// `N(0, 2 sigma(u)^2)` for Gaussian data.
pub fn check_uniform_ratios(
    z: &Matrix,
    gt: &GroundTruth,
    delta: f64,
    r: f64,
    n_dirs: usize,
    seed: u64,
) -> Result<RatioReport> {
    if !matches!(gt.family(), Family::Gaussian) {
        return Err(Error::NoAnalyticOracle(format!(
            "{} block differences",
            gt.family().name()
        )));
    }
    if z.cols() != gt.dim() {
        return Err(Error::DimensionMismatch {
            expected: gt.dim(),
            got: z.cols(),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut rg = rng::stream(seed, "ratio-directions", 0);
    let mut chosen = Vec::with_capacity(n_dirs);
    let mut attempts = 0usize;
    while chosen.len() < n_dirs {
        attempts += 1;
        if attempts > 1000 * n_dirs.max(1) {
            return Err(Error::invalid(format!(
                "no directions with block deviation >= {r} after {} draws",
                attempts - 1
            )));
        }
        let u = random_unit(&mut rg, gt.dim());
        let sigma = std::f64::consts::SQRT_2 * directional_sigma(gt, &u)?;
        if sigma >= r && sigma > 0.0 {
            chosen.push((u, sigma));
        }
    }
    use rayon::prelude::*;
    let directions: Vec<DirectionMargins> = chosen
        .into_par_iter()
        .enumerate()
        .map(|(index, (u, sigma))| {
            let law = MarginalLaw::Normal { sd: sigma };
            let sorted = sorted_ascending(&z.project(&u)).expect("finite blocks");
            let mirrored: Vec<f64> = sorted.iter().rev().map(|v| -v).collect();
            let a = upper_tail_margin(&sorted, &law, delta);
            let b = upper_tail_margin(&mirrored, &Mirrored(&law), delta);
            let prop_a_worst = match (a, b) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            };
            let prop_b_worst = interval_excess(&sorted, &law) - 2.0 * delta;
            let pass = prop_a_worst.is_none_or(|w| w <= 0.0) && prop_b_worst <= 0.0;
            DirectionMargins {
                index,
                direction: u,
                sigma,
                prop_a_worst,
                prop_b_worst,
                pass,
            }
        })
        .collect();
    let pass_fraction = if directions.is_empty() {
        1.0
    } else {
        directions.iter().filter(|m| m.pass).count() as f64 / directions.len() as f64
    };
    Ok(RatioReport {
        delta,
        r_used: r,
        directions,
        pass_fraction,
    })
}
