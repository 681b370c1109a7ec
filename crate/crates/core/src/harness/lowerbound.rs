//! Lower-bound experiment for the empirical mean of Gaussian data.
//!
//! With `Y = sqrt(N) (mean - mu) ~ N(0, Sigma)` drawn directly in the
//! eigenbasis, the supremum of `<Y, u> / sigma(u)` over the top-`k`
//! eigenspace is `||G^{(k)}||` (chi with `k` degrees of freedom) and the
//! supremum of `<Y, u>` over unit vectors of the complement is
//! `sqrt(sum_{i>k} lambda_i G_i^2)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::report::Tabular;
use super::stats::{ks_pvalue, ks_statistic};
use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, empirical_quantile};
use crate::rng;

/// Random complement directions per trial for the sampled lower surrogate.
const SAMPLED_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LowerBoundConfig {
    pub n: usize,
    pub delta: f64,
    pub c: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for LowerBoundConfig {
    fn default() -> Self {
        LowerBoundConfig {
            n: 10_000,
            delta: 0.01,
            c: 1.0,
            trials: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub n: usize,
    pub delta: f64,
    pub c: f64,
    pub trials: usize,
    /// `1 + (2C + sqrt 2)^2 ln(1/delta)`.
    pub k0: f64,
    /// Subspace dimension `min(floor(k0), d)`.
    pub k: usize,
    pub top_quantile: f64,
    pub top_oracle_quantile: f64,
    pub top_ks_statistic: f64,
    pub top_ks_pvalue: f64,
    /// `sqrt(k0 - 1) - sqrt(2 ln(1/delta))`.
    pub concentration_floor: f64,
    pub complement_quantile: f64,
    /// Scaled-chi (Satterthwaite) approximation of the same quantile.
    pub complement_oracle_quantile: f64,
    pub complement_sampled_quantile: f64,
    /// `sqrt(sum_{i>k} lambda_i)`.
    pub tail_root: f64,
    /// `max(0, q(complement) - C sqrt(lambda_{k+1} ln(1/delta))) / sqrt(N)`.
    pub strong_term_proxy: f64,
    /// `sqrt(sum_{i>k} lambda_i / N)`.
    pub bound: f64,
}

impl Tabular for LowerBoundReport {}

fn chi_quantile(dof: f64, p: f64) -> f64 {
    ChiSquared::new(dof).expect("positive dof").inverse_cdf(p).sqrt()
}

pub fn lower_bound_experiment(
    spec: &DistributionSpec,
    config: &LowerBoundConfig,
) -> Result<LowerBoundReport> {
    if !matches!(spec.family, Family::Gaussian) {
        return Err(Error::invalid(format!(
            "lower-bound experiment needs a gaussian family, got {}",
            spec.family.name()
        )));
    }
    spec.spectrum.validate()?;
    let LowerBoundConfig {
        n,
        delta,
        c,
        trials,
        seed,
    } = *config;
    if !(delta > 0.0 && delta < 1.0) || c < 0.0 || trials == 0 || n == 0 {
        return Err(Error::invalid("need delta in (0,1), C >= 0, trials >= 1, N >= 1"));
    }
    let lambda = &spec.spectrum.eigenvalues;
    let d = lambda.len();
    let log = (1.0 / delta).ln();
    let k0 = 1.0 + (2.0 * c + std::f64::consts::SQRT_2).powi(2) * log;
    let k = (k0.floor() as usize).min(d);
    let tail: Vec<f64> = lambda[k..].to_vec();

    let draws: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, "lower-bound", t as u64);
            let g: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
            let top = compensated_sum(g[..k].iter().map(|v| v * v)).sqrt();
            let y: Vec<f64> = tail.iter().zip(&g[k..]).map(|(l, gi)| l.sqrt() * gi).collect();
            let complement = compensated_sum(y.iter().map(|v| v * v)).sqrt();
            let sampled = if y.is_empty() {
                0.0
            } else {
                (0..SAMPLED_DIRECTIONS)
                    .map(|_| {
                        let u = crate::matrix::random_unit(&mut r, y.len());
                        crate::matrix::dot(&u, &y)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            (top, complement, sampled)
        })
        .collect();

    let level = 1.0 - delta;
    let pick = |f: fn(&(f64, f64, f64)) -> f64| -> f64 {
        let v: Vec<f64> = draws.iter().map(f).collect();
        empirical_quantile(&v, level).expect("trials >= 1").0
    };
    let top_quantile = pick(|x| x.0);
    let complement_quantile = pick(|x| x.1);
    let complement_sampled_quantile = pick(|x| x.2);

    let (top_oracle_quantile, top_ks_statistic, top_ks_pvalue) = if k > 0 {
        let chi2 = ChiSquared::new(k as f64).expect("k >= 1");
        let tops: Vec<f64> = draws.iter().map(|x| x.0).collect();
        let stat = ks_statistic(&tops, |x| if x <= 0.0 { 0.0 } else { chi2.cdf(x * x) });
        (chi_quantile(k as f64, level), stat, ks_pvalue(stat, trials))
    } else {
        (0.0, 0.0, 1.0)
    };

    let s1 = compensated_sum(tail.iter().copied());
    let s2 = compensated_sum(tail.iter().map(|l| l * l));
    let complement_oracle_quantile = if s1 > 0.0 && s2 > 0.0 {
        let scale = s2 / s1;
        let dof = s1 * s1 / s2;
        scale.sqrt() * chi_quantile(dof, level)
    } else {
        0.0
    };

    let next = lambda.get(k).copied().unwrap_or(0.0);
    let strong_term_proxy = if tail.is_empty() {
        0.0
    } else {
        (complement_quantile - c * (next * log).sqrt()).max(0.0) / (n as f64).sqrt()
    };

    Ok(LowerBoundReport {
        n,
        delta,
        c,
        trials,
        k0,
        k,
        top_quantile,
        top_oracle_quantile,
        top_ks_statistic,
        top_ks_pvalue,
        concentration_floor: (k0 - 1.0).sqrt() - (2.0 * log).sqrt(),
        complement_quantile,
        complement_oracle_quantile,
        complement_sampled_quantile,
        tail_root: s1.sqrt(),
        strong_term_proxy,
        bound: (s1 / n as f64).sqrt(),
    })
}
