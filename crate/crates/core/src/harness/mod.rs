//! Monte Carlo trials, baselines, summaries, the lower-bound experiment
//! and report files.

pub mod baselines;
mod lowerbound;
pub mod report;
pub mod stats;

pub use baselines::{default_mom_blocks, empirical_mean, median_of_means};
pub use lowerbound::{lower_bound_experiment, LowerBoundConfig, LowerBoundReport};
pub use report::{read_report, write_report, ReportFormat, Tabular};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    directional_sigma, make_ground_truth, sample_dataset, tail_eigensum, DistributionSpec,
};
use crate::error::{Error, Result};
use crate::matrix::{canonical, dot, random_unit, Matrix};
use crate::mean::{estimate_mean, MeanConfig};
use crate::numeric::empirical_quantile;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Dirmean,
    EmpiricalMean,
    MedianOfMeans,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Dirmean => "dirmean",
            EstimatorKind::EmpiricalMean => "empirical-mean",
            EstimatorKind::MedianOfMeans => "median-of-means",
        }
    }
}

/// Rows the comparator estimators see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineRows {
    /// All `n_total` rows, the same data the main estimator receives.
    #[default]
    All,
    /// Only the first third, matching the sample behind the marginal means.
    FirstThird,
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![
        EstimatorKind::Dirmean,
        EstimatorKind::EmpiricalMean,
        EstimatorKind::MedianOfMeans,
    ]
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub distribution: DistributionSpec,
    /// Rows handed to each estimator (`3N`).
    pub n_total: usize,
    pub delta: f64,
    pub trials: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    /// Number of error-measurement directions.
    pub probes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config: MeanConfig,
    /// Median-of-means block count; `None` means `ceil(8 ln(e/delta))`.
    #[serde(default)]
    pub mom_blocks: Option<usize>,
    #[serde(default)]
    pub baseline_rows: BaselineRows,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let d = self.distribution.dim();
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.probes < d {
            return Err(Error::invalid(format!(
                "need at least d = {d} probes, got {}",
                self.probes
            )));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("no estimators selected"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.n_total < 3 {
            return Err(Error::Sizing {
                what: "scenario",
                got: self.n_total,
                minimal: 3,
            });
        }
        Ok(())
    }

    /// The `N` of the bound: rows per third.
    pub fn n(&self) -> usize {
        self.n_total / 3
    }
}

/// `+e_k`, then `-e_k`, then seeded uniform directions; exactly `count`.
pub fn probe_directions(d: usize, count: usize, seed: u64) -> Matrix {
    let mut rows: Vec<f64> = Vec::with_capacity(count * d);
    let mut r = rng::stream(seed, "error-probes", 0);
    for i in 0..count {
        let u = if i < d {
            canonical(d, i)
        } else if i < 2 * d {
            canonical(d, i - d).into_iter().map(|v| -v).collect()
        } else {
            random_unit(&mut r, d)
        };
        rows.extend(u);
    }
    Matrix::from_vec(count, d, rows).expect("shape")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub estimator: EstimatorKind,
    pub dir_index: usize,
    /// `<mu_hat - mu, u>`.
    pub error: f64,
    pub sigma_u: f64,
    pub weak_term: f64,
    pub strong_term_k1: f64,
    pub strong_term_k2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTable {
    pub rows: Vec<TrialRow>,
    pub probes: Matrix,
    pub delta: f64,
    pub n: usize,
}

impl Tabular for TrialTable {
    fn header(&self) -> Vec<String> {
        [
            "trial",
            "estimator",
            "dir_index",
            "error",
            "sigma_u",
            "weak_term",
            "strong_term_k1",
            "strong_term_k2",
        ]
        .map(String::from)
        .to_vec()
    }

    fn records(&self) -> Vec<Vec<String>> {
        use report::fmt_f64;
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.trial.to_string(),
                    r.estimator.name().to_string(),
                    r.dir_index.to_string(),
                    fmt_f64(r.error),
                    fmt_f64(r.sigma_u),
                    fmt_f64(r.weak_term),
                    fmt_f64(r.strong_term_k1),
                    fmt_f64(r.strong_term_k2),
                ]
            })
            .collect()
    }
}

/// `(ceil(ln(1/delta)), ceil(4 ln(1/delta)))`, clamped to the dimension.
pub fn tail_indices(delta: f64, d: usize) -> (usize, usize) {
    let l = (1.0 / delta).ln();
    ((l.ceil() as usize).min(d), ((4.0 * l).ceil() as usize).min(d))
}

/// Runs every trial; the table is a pure function of the scenario.
pub fn run_trials(sc: &Scenario) -> Result<TrialTable> {
    sc.validate()?;
    let gt = make_ground_truth(&sc.distribution)?;
    let d = gt.dim();
    let n = sc.n();
    let probes = probe_directions(d, sc.probes, sc.seed);
    let (k1, k2) = tail_indices(sc.delta, d);
    let log_term = ((1.0 / sc.delta).ln() / n as f64).sqrt();
    let strong1 = (tail_eigensum(&gt, k1)? / n as f64).sqrt();
    let strong2 = (tail_eigensum(&gt, k2)? / n as f64).sqrt();
    let sigmas: Vec<f64> = probes
        .iter_rows()
        .map(|u| directional_sigma(&gt, u))
        .collect::<Result<_>>()?;
    let mom_blocks = sc.mom_blocks.unwrap_or_else(|| default_mom_blocks(sc.delta));

    let mut estimators = sc.estimators.clone();
    estimators.sort();
    estimators.dedup();

    let per_trial: Vec<Vec<TrialRow>> = (0..sc.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<TrialRow>> {
            let ds = sample_dataset(&gt, sc.n_total, rng::derive_seed(sc.seed, "trial", t as u64))?;
            let baseline_x = match sc.baseline_rows {
                BaselineRows::All => ds.x.clone(),
                BaselineRows::FirstThird => ds.x.slice_rows(0, n),
            };
            let mut rows = Vec::with_capacity(estimators.len() * probes.rows());
            for &kind in &estimators {
                let mu_hat = match kind {
                    EstimatorKind::Dirmean => estimate_mean(&ds.x, sc.delta, &sc.config)?.mu_hat,
                    EstimatorKind::EmpiricalMean => empirical_mean(&baseline_x)?,
                    EstimatorKind::MedianOfMeans => median_of_means(&baseline_x, mom_blocks)?,
                };
                let diff: Vec<f64> = mu_hat.iter().zip(&gt.mu).map(|(a, b)| a - b).collect();
                for (i, u) in probes.iter_rows().enumerate() {
                    rows.push(TrialRow {
                        trial: t,
                        estimator: kind,
                        dir_index: i,
                        error: dot(&diff, u),
                        sigma_u: sigmas[i],
                        weak_term: sigmas[i] * log_term,
                        strong_term_k1: strong1,
                        strong_term_k2: strong2,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    Ok(TrialTable {
        rows: per_trial.into_iter().flatten().collect(),
        probes,
        delta: sc.delta,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSummary {
    pub dir_index: usize,
    pub sigma_u: f64,
    /// `(1 - delta)`-quantile of the signed error.
    pub quantile: f64,
    /// Too few trials for the level; the maximum is reported.
    pub saturated: bool,
    pub weak_term: f64,
    pub strong_term_k1: f64,
    pub strong_term_k2: f64,
    pub ratio_k1: f64,
    pub ratio_k2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub c_hat_k1: f64,
    pub c_hat_k2: f64,
    /// `(1 - delta)`-quantile over trials of the largest probe error.
    pub worst_probe_quantile: f64,
    pub worst_probe_saturated: bool,
    pub directions: Vec<DirectionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub delta: f64,
    pub n: usize,
    pub trials: usize,
    pub estimators: Vec<EstimatorSummary>,
}

impl Summary {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == kind)
    }
}

impl Tabular for Summary {
    fn header(&self) -> Vec<String> {
        [
            "estimator",
            "dir_index",
            "sigma_u",
            "quantile",
            "saturated",
            "weak_term",
            "strong_term_k1",
            "strong_term_k2",
            "ratio_k1",
            "ratio_k2",
        ]
        .map(String::from)
        .to_vec()
    }

    fn records(&self) -> Vec<Vec<String>> {
        use report::fmt_f64;
        let mut out = Vec::new();
        for e in &self.estimators {
            for s in &e.directions {
                out.push(vec![
                    e.estimator.name().to_string(),
                    s.dir_index.to_string(),
                    fmt_f64(s.sigma_u),
                    fmt_f64(s.quantile),
                    s.saturated.to_string(),
                    fmt_f64(s.weak_term),
                    fmt_f64(s.strong_term_k1),
                    fmt_f64(s.strong_term_k2),
                    fmt_f64(s.ratio_k1),
                    fmt_f64(s.ratio_k2),
                ]);
            }
        }
        out
    }
}

fn ratio(q: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        q / bound
    } else if q <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Per-direction `(1 - delta)`-quantiles and fitted constants.
pub fn per_direction_quantiles(table: &TrialTable, delta: f64) -> Result<Summary> {
    if table.rows.is_empty() {
        return Err(Error::Empty("trial table"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut kinds: Vec<EstimatorKind> = table.rows.iter().map(|r| r.estimator).collect();
    kinds.sort();
    kinds.dedup();
    let trials = table.rows.iter().map(|r| r.trial).max().unwrap_or(0) + 1;
    let dirs = table.rows.iter().map(|r| r.dir_index).max().unwrap_or(0) + 1;
    let level = 1.0 - delta;

    let mut estimators = Vec::new();
    for kind in kinds {
        let rows: Vec<&TrialRow> = table.rows.iter().filter(|r| r.estimator == kind).collect();
        let mut by_dir: Vec<Vec<f64>> = vec![Vec::new(); dirs];
        let mut first: Vec<Option<&TrialRow>> = vec![None; dirs];
        let mut worst = vec![f64::NEG_INFINITY; trials];
        for r in &rows {
            by_dir[r.dir_index].push(r.error);
            first[r.dir_index].get_or_insert(r);
            worst[r.trial] = worst[r.trial].max(r.error);
        }
        let mut directions = Vec::new();
        for (i, errors) in by_dir.iter().enumerate() {
            let Some(meta) = first[i] else { continue };
            let (quantile, saturated) = empirical_quantile(errors, level).expect("nonempty");
            directions.push(DirectionSummary {
                dir_index: i,
                sigma_u: meta.sigma_u,
                quantile,
                saturated,
                weak_term: meta.weak_term,
                strong_term_k1: meta.strong_term_k1,
                strong_term_k2: meta.strong_term_k2,
                ratio_k1: ratio(quantile, meta.weak_term + meta.strong_term_k1),
                ratio_k2: ratio(quantile, meta.weak_term + meta.strong_term_k2),
            });
        }
        worst.retain(|w| w.is_finite());
        let (worst_probe_quantile, worst_probe_saturated) =
            empirical_quantile(&worst, level).expect("nonempty");
        estimators.push(EstimatorSummary {
            estimator: kind,
            c_hat_k1: directions.iter().map(|s| s.ratio_k1).fold(0.0, f64::max),
            c_hat_k2: directions.iter().map(|s| s.ratio_k2).fold(0.0, f64::max),
            worst_probe_quantile,
            worst_probe_saturated,
            directions,
        });
    }
    Ok(Summary {
        delta,
        n: table.n,
        trials,
        estimators,
    })
}
