//! Monte Carlo checks of the norm-equivalence consequences for block sums
//! `Z_m = m^{-1/2} * sum of m centered marginals` along one direction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{directional_sigma, GroundTruth};
use crate::error::{Error, Result};
use crate::matrix::random_unit;
use crate::numeric::{empirical_quantile, CompensatedSum};
use crate::rng;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmallBallConfig {
    pub m: usize,
    pub gamma: f64,
    pub trials: usize,
    /// Truncation level for the second-moment fact.
    pub xi: f64,
    pub seed: u64,
}

impl Default for SmallBallConfig {
    fn default() -> Self {
        SmallBallConfig {
            m: 400,
            gamma: 0.05,
            trials: 100_000,
            xi: 1.0 / 50.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallReport {
    pub m: usize,
    pub gamma: f64,
    pub trials: usize,
    pub direction: Vec<f64>,
    pub sigma: f64,
    pub q_moment: f64,
    pub kappa: f64,
    pub p_nonnegative: f64,
    pub p_nonpositive: f64,
    pub xi: f64,
    pub alpha: f64,
    /// `E[Y^2 1{|Y| >= Q_{1-alpha}(|Y|)}] / E[Y^2]` for a single marginal.
    pub truncated_ratio: f64,
    pub lq_l2_ratio: f64,
    pub lq_l2_bound: f64,
    /// Smallest `L` with `sup_x P{|Z_m - x| <= eps sigma} <= max(2 eps L, gamma)`
    /// over the epsilon grid.
    pub small_ball_l: f64,
}

fn draw<F>(trials: usize, seed: u64, label: &str, f: F) -> Vec<f64>
where
    F: Fn(&mut rng::StreamRng) -> f64 + Sync,
{
    let mut out = vec![0.0; trials];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut r = rng::stream(seed, label, c as u64);
        for v in chunk {
            *v = f(&mut r);
        }
    });
    out
}

fn epsilon_grid() -> Vec<f64> {
    (0..=60).map(|i| 1e-3 * 10f64.powf(i as f64 / 15.0)).collect()
}

/// Largest fraction of a sorted sample inside any window of width `2 h`.
fn max_window(sorted: &[f64], h: f64) -> f64 {
    let mut best = 0usize;
    let mut hi = 0usize;
    for lo in 0..sorted.len() {
        hi = hi.max(lo);
        while hi < sorted.len() && sorted[hi] - sorted[lo] <= 2.0 * h {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    best as f64 / sorted.len() as f64
}

pub fn small_ball_check(gt: &GroundTruth, config: &SmallBallConfig) -> Result<SmallBallReport> {
    let SmallBallConfig {
        m,
        gamma,
        trials,
        xi,
        seed,
    } = *config;
    if m == 0 || trials == 0 {
        return Err(Error::invalid("m and trials must be positive"));
    }
    if !(gamma > 0.0 && gamma < 1.0 && xi > 0.0 && xi < 0.5) {
        return Err(Error::invalid("need gamma in (0,1) and xi in (0,1/2)"));
    }
    let u = random_unit(&mut rng::stream(seed, "small-ball-direction", 0), gt.dim());
    let sigma = directional_sigma(gt, &u)?;
    let q = gt.q_moment;
    let kappa = gt.kappa;

    let scale = 1.0 / (m as f64).sqrt();
    let mut z = draw(trials, seed, "small-ball-sums", |r| {
        let mut acc = CompensatedSum::default();
        for _ in 0..m {
            acc.add(gt.sample_marginal(&u, r));
        }
        acc.value() * scale
    });
    let singles = draw(trials, seed, "small-ball-singles", |r| gt.sample_marginal(&u, r));

    let n = trials as f64;
    let p_nonnegative = z.iter().filter(|v| **v >= 0.0).count() as f64 / n;
    let p_nonpositive = z.iter().filter(|v| **v <= 0.0).count() as f64 / n;

    let alpha = (xi / (kappa * kappa)).powf(q / (q - 2.0));
    let abs: Vec<f64> = singles.iter().map(|v| v.abs()).collect();
    let (cut, _) = empirical_quantile(&abs, 1.0 - alpha).expect("nonempty");
    let total: f64 = singles.iter().map(|v| v * v).sum();
    let tail: f64 = singles.iter().filter(|v| v.abs() >= cut).map(|v| v * v).sum();
    let truncated_ratio = if total > 0.0 { tail / total } else { 0.0 };

    let lq = (z.iter().map(|v| v.abs().powf(q)).sum::<f64>() / n).powf(1.0 / q);
    let l2 = (z.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let lq_l2_ratio = if l2 > 0.0 { lq / l2 } else { 0.0 };
    let lq_l2_bound = (4.0 * (q - 1.0)).sqrt() * kappa;

    z.sort_by(f64::total_cmp);
    let small_ball_l = epsilon_grid()
        .into_iter()
        .filter_map(|eps| {
            let s = max_window(&z, eps * sigma);
            (s > gamma).then(|| s / (2.0 * eps))
        })
        .fold(0.0, f64::max);

    Ok(SmallBallReport {
        m,
        gamma,
        trials,
        direction: u,
        sigma,
        q_moment: q,
        kappa,
        p_nonnegative,
        p_nonpositive,
        xi,
        alpha,
        truncated_ratio,
        lq_l2_ratio,
        lq_l2_bound,
        small_ball_l,
    })
}
