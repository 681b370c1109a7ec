//! Direction-dependent robust mean estimation for heavy-tailed data.
//!
//! The estimator combines trimmed marginal means with blocked directional
//! variance estimates and returns the center of the smallest-slack
//! intersection of slabs over a finite direction set.

pub mod blocks;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod mean;
pub mod numeric;
pub mod rng;
pub mod trimmed;
pub mod variance;

pub use blocks::{block_averages, pair_differences, plan_blocks, BlockPlan, BlockPurpose};
pub use diagnostics::{
    check_ratio_properties, check_uniform_ratios, quantile_sandwich_check, small_ball_check, MarginalOracle,
    PropertyReport, RatioReport, SmallBallConfig, SmallBallReport,
};
pub use distributions::{
    directional_sigma, jitter, make_ground_truth, marginal_tail_prob, sample_dataset, tail_eigensum,
    Contamination, DistributionSpec, Family, GroundTruth, MarginalLaw, SpectrumSpec,
};
pub use error::{Error, Result};
pub use harness::{
    lower_bound_experiment, per_direction_quantiles, read_report, run_trials, write_report, EstimatorKind,
    LowerBoundConfig, LowerBoundReport, ReportFormat, Scenario, Summary, Tabular, TrialTable,
};
pub use matrix::{Dataset, Matrix, Provenance};
pub use mean::{
    build_direction_set, estimate_mean, fit_marginal, slab_width, solve_center, MarginalMeanEstimator,
    MeanConfig, MeanEstimate, SlabSystem, SolverConfig,
};
pub use trimmed::{
    empirical_quantile_hat, rearrange_desc, trim_sets, trimmed_abs_moment, trimmed_mean, Normalization,
    SortedSample, TrimPlan,
};
pub use variance::{critical_level, fit_variance, TrimMode, VarianceConfig, VarianceEstimator};
