//! Benchmark and sweep runs driven by an [`ExperimentConfig`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use wdrop_core::experiment::{self, AggregateSummary, ExperimentError, FoldReport, Job};

use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{self, ReportError};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub reports: Vec<FoldReport>,
    pub summary: AggregateSummary,
    pub files: Vec<PathBuf>,
}

/// Seed precedence: explicit value, then the config, then `WDROP_SEED`,
/// then 0.
pub fn resolve_seed(explicit: Option<u64>, cfg: Option<&ExperimentConfig>) -> Result<u64, String> {
    if let Some(s) = explicit.or_else(|| cfg.and_then(|c| c.seed)) {
        return Ok(s);
    }
    match std::env::var("WDROP_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| format!("WDROP_SEED is not an unsigned integer: {v:?}")),
        Err(_) => Ok(0),
    }
}

pub fn dry_run(cfg: &ExperimentConfig, base: &Path, seed: u64) -> Result<Vec<Job>, BenchError> {
    let datasets = cfg.load_datasets(seed, base)?;
    Ok(experiment::job_matrix(&datasets, &cfg.method_configs()?, &cfg.split_spec()?, seed)?)
}

/// Runs every job, aggregates and writes the output set into `out`.
/// `base` resolves relative CSV dataset paths.
pub fn run(
    cfg: &ExperimentConfig,
    base: &Path,
    seed: u64,
    out: &Path,
    verbose: bool,
) -> Result<BenchOutput, BenchError> {
    let datasets = cfg.load_datasets(seed, base)?;
    let methods = cfg.method_configs()?;
    let split = cfg.split_spec()?;
    let total = experiment::job_matrix(&datasets, &methods, &split, seed)?.len();
    let mut done = 0usize;
    let start = Instant::now();
    let reports = experiment::run_experiment_with(&datasets, &methods, &split, seed, cfg.bins, |job| {
        done += 1;
        if verbose {
            eprintln!(
                "[{done}/{total}] {} {} {} fold {} (train {}, test {}) at {:.1}s",
                job.dataset,
                job.method,
                job.split,
                job.fold,
                job.n_train,
                job.n_test,
                start.elapsed().as_secs_f64()
            );
        }
    })?;
    let summary = experiment::aggregate(&reports)?;
    let files = report::write_bench(out, &reports, &summary)?;
    Ok(BenchOutput { reports, summary, files })
}

/// Hyperparameter swept by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Drop rate.
    P,
    /// Sub-networks per W-dropout step.
    L,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::P => "p",
            SweepParam::L => "L",
        }
    }

    /// Grids used when neither the command line nor the config lists values.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParam::P => vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            SweepParam::L => vec![4.0, 5.0, 8.0, 10.0, 20.0],
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<(), ConfigError> {
        match self {
            SweepParam::P => cfg.drop_rate = Some(value),
            SweepParam::L => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(ConfigError::Invalid(format!("L must be a whole number, got {value}")));
                }
                cfg.train_samples = Some(value as usize);
            }
        }
        cfg.validate()
    }
}

pub fn sweep_values(param: SweepParam, explicit: Option<Vec<f64>>, cfg: &ExperimentConfig) -> Vec<f64> {
    explicit
        .or_else(|| match param {
            SweepParam::P => cfg.sweep_p.clone(),
            SweepParam::L => cfg.sweep_l.as_ref().map(|v| v.iter().map(|&l| l as f64).collect()),
        })
        .unwrap_or_else(|| param.default_values())
}

/// One full bench per value, written to `out/sweep-<param>/<value>/`, plus
/// plot CSVs across values in `out/sweep-<param>/plots/`.
pub fn sweep(
    cfg: &ExperimentConfig,
    base: &Path,
    seed: u64,
    param: SweepParam,
    values: &[f64],
    out: &Path,
    verbose: bool,
) -> Result<Vec<(String, BenchOutput)>, BenchError> {
    if values.is_empty() {
        return Err(ConfigError::Invalid("sweep needs at least one value".into()).into());
    }
    let root = out.join(format!("sweep-{}", param.name()));
    let mut runs = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        param.apply(&mut c, v)?;
        let label = v.to_string();
        if verbose {
            eprintln!("{} = {label}", param.name());
        }
        let res = run(&c, base, seed, &root.join(&label), verbose)?;
        runs.push((label, res));
    }
    let summaries: Vec<(String, AggregateSummary)> = runs.iter().map(|(l, r)| (l.clone(), r.summary.clone())).collect();
    report::write_sweep_plots(&root.join("plots"), &summaries)?;
    Ok(runs)
}
