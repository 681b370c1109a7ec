//! `dirmean`: estimation, simulation, diagnostics and lower-bound runs.
//!
//! Exit codes: 0 success, 1 usage or invalid configuration, 2 infeasible
//! sizing, 3 I/O failure. Errors print one line prefixed `ERROR <code>:`.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dirmean::diagnostics::{
    check_ratio_properties, check_uniform_ratios, quantile_sandwich_check, small_ball_check, PropertyReport,
};
use dirmean::harness::Tabular;
use dirmean::{
    critical_level, estimate_mean, fit_variance, jitter, lower_bound_experiment, make_ground_truth, matrix,
    per_direction_quantiles, rng, run_trials, sample_dataset, write_report, Dataset, Error, ReportFormat,
    Scenario,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use config::{DiagnoseConfig, EstimateConfig, LowerBoundFile};

#[derive(Parser, Debug)]
#[command(
    name = "dirmean",
    version,
    about = "Direction-dependent robust mean estimation"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, env = "DIRMEAN_THREADS")]
    threads: Option<usize>,
    /// Report format: json or csv.
    #[arg(long, global = true, default_value = "json")]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the mean of a CSV dataset or of a generated sample.
    Estimate {
        /// Headerless CSV of observations.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Distribution spec JSON to sample from.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Rows to generate from the spec.
        #[arg(long)]
        rows: Option<usize>,
        /// Confidence parameter.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Run a Monte Carlo scenario.
    Simulate,
    /// Run the ratio, quantile and small-ball diagnostics for a spec.
    Diagnose,
    /// Run the empirical-mean lower-bound experiment.
    Lowerbound,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Sizing { .. } => 2,
            Error::Io { .. } => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn require_config<T: DeserializeOwned>(cli: &Cli) -> Result<T, Failure> {
    match &cli.config {
        Some(p) => read_json(p),
        None => Err(usage("this subcommand requires --config")),
    }
}

fn emit<T: Tabular>(report: &T, dir: &Path, stem: &str, format: ReportFormat) -> Result<(), Failure> {
    let ext = match format {
        ReportFormat::Json => "json",
        ReportFormat::Csv => "csv",
    };
    write_report(report, &dir.join(format!("{stem}.{ext}")), format)?;
    Ok(())
}

fn estimate(
    cli: &Cli,
    data: &Option<PathBuf>,
    spec: &Option<PathBuf>,
    rows: Option<usize>,
    delta: Option<f64>,
    format: ReportFormat,
) -> Result<(), Failure> {
    let mut cfg: EstimateConfig = match &cli.config {
        Some(p) => read_json(p)?,
        None => EstimateConfig::default(),
    };
    if data.is_some() {
        cfg.data.clone_from(data);
    }
    if let Some(p) = spec {
        cfg.distribution = Some(read_json(p)?);
    }
    if rows.is_some() {
        cfg.rows = rows;
    }
    if let Some(d) = delta {
        cfg.delta = d;
    }
    let seed = cli.seed.unwrap_or(0);
    let ds = match (&cfg.data, &cfg.distribution) {
        (Some(path), _) => Dataset::read_csv(path)?,
        (None, Some(spec)) => {
            let rows = cfg
                .rows
                .ok_or_else(|| usage("generating a sample needs --rows"))?;
            sample_dataset(&make_ground_truth(spec)?, rows, seed)?
        }
        (None, None) => return Err(usage("estimate needs --data or --spec")),
    };
    let x = jitter(&ds.x, cfg.jitter, rng::derive_seed(seed, "jitter", 0))?;
    let est = estimate_mean(&x, cfg.delta, &cfg.mean)?;
    emit(&est, &cli.out, "estimate", format)
}

fn simulate(cli: &Cli, format: ReportFormat) -> Result<(), Failure> {
    let mut sc: Scenario = require_config(cli)?;
    if let Some(s) = cli.seed {
        sc.seed = s;
    }
    let table = run_trials(&sc)?;
    let summary = per_direction_quantiles(&table, sc.delta)?;
    write_report(&table, &cli.out.join("trials.csv"), ReportFormat::Csv)?;
    emit(&summary, &cli.out, "summary", format)
}

#[derive(Serialize)]
struct RatioPropertiesOutput {
    direction: Vec<f64>,
    sample_size: usize,
    report: PropertyReport,
    sandwich: Option<bool>,
}

impl Tabular for RatioPropertiesOutput {}

#[derive(Serialize)]
struct Skipped {
    skipped: String,
}

impl Tabular for Skipped {}

fn diagnose(cli: &Cli, format: ReportFormat) -> Result<(), Failure> {
    let cfg: DiagnoseConfig = require_config(cli)?;
    let seed = cli.seed.unwrap_or(0);
    let gt = make_ground_truth(&cfg.distribution)?;
    let d = gt.dim();
    let theta = cfg.theta.unwrap_or(7.0 * cfg.delta_param);

    let u = matrix::random_unit(&mut rng::stream(seed, "diagnose-direction", 0), d);
    match gt.marginal_law(&u) {
        Ok(law) => {
            let mut r = rng::stream(seed, "diagnose-sample", 0);
            let sample: Vec<f64> = (0..cfg.sample_size)
                .map(|_| gt.sample_marginal(&u, &mut r))
                .collect();
            let report = check_ratio_properties(&sample, &law, cfg.delta_param, theta)?;
            let sandwich = quantile_sandwich_check(&sample, &law, theta, cfg.delta_param).ok();
            let out = RatioPropertiesOutput {
                direction: u,
                sample_size: cfg.sample_size,
                report,
                sandwich,
            };
            emit(&out, &cli.out, "ratio_properties", format)?;
        }
        Err(e @ Error::NoAnalyticOracle(_)) => emit(
            &Skipped {
                skipped: e.to_string(),
            },
            &cli.out,
            "ratio_properties",
            format,
        )?,
        Err(e) => return Err(e.into()),
    }

    let ratio_rows = cfg.ratio_rows.unwrap_or(2 * 10_000 * 50).max(2);
    let ds = sample_dataset(
        &gt,
        ratio_rows - ratio_rows % 2,
        rng::derive_seed(seed, "diagnose-ratios", 0),
    )?;
    let var = fit_variance(&ds.x, &cfg.variance)?;
    let r = cfg
        .r
        .unwrap_or_else(|| critical_level(&gt.eigenvalues, var.plan.n, cfg.variance.c0));
    match check_uniform_ratios(&var.z, &gt, cfg.delta_param, r, cfg.n_dirs, seed) {
        Ok(rep) => {
            write_report(&rep, &cli.out.join("ratios.json"), ReportFormat::Json)?;
            write_report(&rep, &cli.out.join("ratios.csv"), ReportFormat::Csv)?;
        }
        Err(e @ Error::NoAnalyticOracle(_)) => {
            emit(
                &Skipped {
                    skipped: e.to_string(),
                },
                &cli.out,
                "ratios",
                ReportFormat::Json,
            )?;
        }
        Err(e) => return Err(e.into()),
    }

    let mut sb = cfg.small_ball;
    sb.seed = seed;
    emit(&small_ball_check(&gt, &sb)?, &cli.out, "small_ball", format)
}

fn lowerbound(cli: &Cli, format: ReportFormat) -> Result<(), Failure> {
    let mut cfg: LowerBoundFile = require_config(cli)?;
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
    }
    let rep = lower_bound_experiment(&cfg.distribution, &cfg.experiment)?;
    emit(&rep, &cli.out, "lowerbound", format)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let format: ReportFormat = cli.format.parse().map_err(|e: Error| usage(e.to_string()))?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", cli.out.display()),
    })?;
    match &cli.command {
        Command::Estimate {
            data,
            spec,
            rows,
            delta,
        } => estimate(cli, data, spec, *rows, *delta, format),
        Command::Simulate => simulate(cli, format),
        Command::Diagnose => diagnose(cli, format),
        Command::Lowerbound => lowerbound(cli, format),
    }
}

fn fail(code: u8, message: &str) -> ExitCode {
    let line = message
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    eprintln!("ERROR {code}: {line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error");
            return fail(1, first.trim_start_matches("error: "));
        }
    };
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return fail(1, &format!("thread pool: {e}")),
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f.code, &f.message),
    }
}
