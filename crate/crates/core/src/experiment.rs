//! Train/evaluate cycles over datasets, split plans and methods, and the
//! two-stage aggregation of per-fold scores.
//!
//! Random streams are addressed from the master seed by position in the
//! job matrix, so any execution order reproduces the same numbers:
//!
//! | purpose            | derive path                                  |
//! |--------------------|----------------------------------------------|
//! | k-fold shuffling   | `[dataset, STREAM_SPLIT]`                    |
//! | training           | `[dataset, plan, method, STREAM_TRAIN]`      |
//! | prediction         | `[dataset, plan, method, STREAM_PREDICT]`    |
//! | generated datasets | `[dataset, STREAM_DATA]`                     |

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::data::{self, DataError, Normalizer, RegressionDataset, SplitKind, SplitPlan, SplitRegime};
use crate::metrics::{self, EvalReport, MetricError};
use crate::rng::SeededRng;
use crate::uncertainty::{self, MethodConfig, UncertaintyError};

pub const STREAM_SPLIT: u64 = 0x5EED_0001;
pub const STREAM_TRAIN: u64 = 0x5EED_0002;
pub const STREAM_PREDICT: u64 = 0x5EED_0003;
/// Used by callers that synthesize datasets from the same master seed.
pub const STREAM_DATA: u64 = 0x5EED_0004;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("no reports to aggregate")]
    NoReports,
    #[error("experiment needs at least one dataset and one method")]
    NothingToRun,
    #[error("invalid split spec: {0}")]
    InvalidSplit(String),
    #[error("{dataset}: {source}")]
    Data { dataset: String, source: DataError },
    #[error("{dataset}/{method}/{split} fold {fold}: {source}")]
    Job { dataset: String, method: String, split: String, fold: usize, source: JobFailure },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JobFailure {
    #[error(transparent)]
    Training(#[from] UncertaintyError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    Test,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Train => "train",
            Side::Test => "test",
        })
    }
}

/// Which split plans to generate per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kinds: Vec<SplitKind>,
    /// Folds of the i.i.d. k-fold split.
    pub folds: usize,
    /// Chunks of ordered (PCA / label) splits.
    pub n_chunks: usize,
    pub regimes: Vec<SplitRegime>,
    /// Keep only the first `n` plans per (kind, regime).
    pub fold_limit: Option<usize>,
}

impl SplitSpec {
    pub fn kfold(folds: usize) -> Self {
        Self { kinds: alloc::vec![SplitKind::IidKfold], folds, n_chunks: 10, regimes: Vec::new(), fold_limit: None }
    }

    /// PCA- and label-based splits in the given regimes.
    pub fn ood(n_chunks: usize, regimes: Vec<SplitRegime>) -> Self {
        Self { kinds: alloc::vec![SplitKind::Pca, SplitKind::Label], folds: 0, n_chunks, regimes, fold_limit: None }
    }

    /// All plans for one dataset.
    pub fn plans(&self, dataset: &RegressionDataset, rng: &mut SeededRng) -> Result<Vec<SplitPlan>, ExperimentError> {
        let wrap = |source| ExperimentError::Data { dataset: dataset.name.clone(), source };
        if self.kinds.is_empty() {
            return Err(ExperimentError::InvalidSplit("no split kinds".to_string()));
        }
        let limit = |mut v: Vec<SplitPlan>| {
            if let Some(n) = self.fold_limit {
                v.truncate(n.max(1));
            }
            v
        };
        let mut plans = Vec::new();
        for &kind in &self.kinds {
            match kind {
                SplitKind::IidKfold => plans.extend(limit(data::kfold(dataset.len(), self.folds, rng).map_err(wrap)?)),
                SplitKind::Pca | SplitKind::Label => {
                    if self.regimes.is_empty() || self.regimes.contains(&SplitRegime::Iid) {
                        return Err(ExperimentError::InvalidSplit(
                            "ordered splits need interpolate and/or extrapolate regimes".to_string(),
                        ));
                    }
                    if self.n_chunks < 3 {
                        return Err(wrap(DataError::TooFewChunks(self.n_chunks)));
                    }
                    let scores = if kind == SplitKind::Pca {
                        data::pca_scores(&dataset.features).map_err(wrap)?
                    } else {
                        dataset.targets.col(0)
                    };
                    for &regime in &self.regimes {
                        let per_regime = data::regime_folds(self.n_chunks, regime)
                            .into_iter()
                            .map(|fold| data::ordered_split(&scores, kind, self.n_chunks, regime, fold))
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(wrap)?;
                        plans.extend(limit(per_regime));
                    }
                }
            }
        }
        for p in &plans {
            p.validate(dataset.len()).map_err(wrap)?;
        }
        Ok(plans)
    }
}

/// One evaluated side of one (dataset, method, split, fold) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub dataset: String,
    pub method: String,
    pub split: String,
    pub kind: SplitKind,
    pub regime: SplitRegime,
    pub fold: usize,
    pub side: Side,
    pub metrics: EvalReport,
}

/// A job of the experiment matrix, as listed by a dry run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub dataset: String,
    pub method: String,
    pub split: String,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
}

fn master_split_rng(master: &SeededRng, dataset_idx: usize) -> SeededRng {
    master.derive(&[dataset_idx as u64, STREAM_SPLIT])
}

/// Enumerates every job without training anything.
pub fn job_matrix(
    datasets: &[RegressionDataset],
    methods: &[MethodConfig],
    split: &SplitSpec,
    seed: u64,
) -> Result<Vec<Job>, ExperimentError> {
    let master = SeededRng::new(seed);
    let mut jobs = Vec::new();
    for (di, ds) in datasets.iter().enumerate() {
        let plans = split.plans(ds, &mut master_split_rng(&master, di))?;
        for plan in &plans {
            for cfg in methods {
                jobs.push(Job {
                    dataset: ds.name.clone(),
                    method: cfg.method.name().to_string(),
                    split: plan.label(),
                    fold: plan.fold,
                    n_train: plan.train.len(),
                    n_test: plan.test.len(),
                });
            }
        }
    }
    Ok(jobs)
}

/// Fits the normalizer on the training rows, trains, predicts both sides
/// and scores them in normalized target units.
pub fn run_fold(
    dataset: &RegressionDataset,
    plan: &SplitPlan,
    cfg: &MethodConfig,
    train_rng: &SeededRng,
    predict_rng: &mut SeededRng,
    bins: usize,
) -> Result<[FoldReport; 2], JobFailure> {
    let train_raw = dataset.subset(&plan.train);
    let norm = Normalizer::fit(&train_raw);
    let train = norm.apply(&train_raw);
    let test = norm.apply(&dataset.subset(&plan.test));
    let model = uncertainty::train(cfg, &train, train_rng)?;
    let mut out = Vec::with_capacity(2);
    for (side, part) in [(Side::Train, &train), (Side::Test, &test)] {
        let pred = model.predict(&part.features, predict_rng)?;
        let metrics = metrics::evaluate(&pred, &part.targets, bins)?;
        out.push(FoldReport {
            dataset: dataset.name.clone(),
            method: cfg.method.name().to_string(),
            split: plan.label(),
            kind: plan.kind,
            regime: plan.regime,
            fold: plan.fold,
            side,
            metrics,
        });
    }
    let test_report = out.pop().expect("two sides");
    let train_report = out.pop().expect("two sides");
    Ok([train_report, test_report])
}

/// Every (dataset, plan, method) job, serially, in matrix order. Each job
/// yields a train and a test report.
pub fn run_experiment(
    datasets: &[RegressionDataset],
    methods: &[MethodConfig],
    split: &SplitSpec,
    seed: u64,
    bins: usize,
) -> Result<Vec<FoldReport>, ExperimentError> {
    run_experiment_with(datasets, methods, split, seed, bins, |_| {})
}

/// [`run_experiment`] with a hook called before each job starts.
pub fn run_experiment_with(
    datasets: &[RegressionDataset],
    methods: &[MethodConfig],
    split: &SplitSpec,
    seed: u64,
    bins: usize,
    mut on_job: impl FnMut(&Job),
) -> Result<Vec<FoldReport>, ExperimentError> {
    if datasets.is_empty() || methods.is_empty() {
        return Err(ExperimentError::NothingToRun);
    }
    let master = SeededRng::new(seed);
    let mut reports = Vec::new();
    for (di, ds) in datasets.iter().enumerate() {
        let plans = split.plans(ds, &mut master_split_rng(&master, di))?;
        for (pi, plan) in plans.iter().enumerate() {
            for (mi, cfg) in methods.iter().enumerate() {
                on_job(&Job {
                    dataset: ds.name.clone(),
                    method: cfg.method.name().to_string(),
                    split: plan.label(),
                    fold: plan.fold,
                    n_train: plan.train.len(),
                    n_test: plan.test.len(),
                });
                let path = [di as u64, pi as u64, mi as u64];
                let train_rng = master.derive(&[path[0], path[1], path[2], STREAM_TRAIN]);
                let mut predict_rng = master.derive(&[path[0], path[1], path[2], STREAM_PREDICT]);
                let pair = run_fold(ds, plan, cfg, &train_rng, &mut predict_rng, bins).map_err(|source| {
                    ExperimentError::Job {
                        dataset: ds.name.clone(),
                        method: cfg.method.name().to_string(),
                        split: plan.label(),
                        fold: plan.fold,
                        source,
                    }
                })?;
                reports.extend(pair);
            }
        }
    }
    Ok(reports)
}

/// Summary statistics of one metric across datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    /// `iid`, or the ordered-split regime (`interpolate` / `extrapolate`)
    /// with PCA and label splits averaged.
    pub split: String,
    pub side: Side,
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub n_datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub rows: Vec<SummaryRow>,
}

impl AggregateSummary {
    pub fn get(&self, method: &str, split: &str, side: Side, metric: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.method == method && r.split == split && r.side == side && r.metric == metric)
    }
}

/// Linear interpolation between order statistics of sorted `v`.
pub fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let h = (v.len() - 1) as f64 * q;
    let lo = crate::math::floor(h) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Fold means per dataset and split kind, averaged over kinds (PCA and
/// label splits count equally), then mean/median/quartiles across datasets.
pub fn aggregate(reports: &[FoldReport]) -> Result<AggregateSummary, ExperimentError> {
    if reports.is_empty() {
        return Err(ExperimentError::NoReports);
    }
    let group_of = |r: &FoldReport| match r.regime {
        SplitRegime::Iid => String::from("iid"),
        regime => regime.to_string(),
    };
    // (method, group, side, metric) -> dataset -> kind -> fold values
    type Nested = BTreeMap<String, BTreeMap<SplitKind, Vec<f64>>>;
    let mut groups: BTreeMap<(String, String, Side, &'static str), Nested> = BTreeMap::new();
    for r in reports {
        for metric in EvalReport::METRICS {
            let value = r.metrics.metric(metric).expect("known metric");
            groups
                .entry((r.method.clone(), group_of(r), r.side, metric))
                .or_default()
                .entry(r.dataset.clone())
                .or_default()
                .entry(r.kind)
                .or_default()
                .push(value);
        }
    }
    let mut rows = Vec::new();
    for ((method, split, side, metric), per_dataset) in groups {
        let mut values: Vec<f64> = per_dataset
            .into_values()
            .map(|kinds| {
                let mut kind_means: Vec<f64> = kinds.into_values().map(|mut v| order_free_mean(&mut v)).collect();
                order_free_mean(&mut kind_means)
            })
            .collect();
        let mean = order_free_mean(&mut values);
        rows.push(SummaryRow {
            method,
            split,
            side,
            metric: metric.to_string(),
            mean,
            median: quantile_sorted(&values, 0.5),
            q25: quantile_sorted(&values, 0.25),
            q75: quantile_sorted(&values, 0.75),
            n_datasets: values.len(),
        });
    }
    Ok(AggregateSummary { rows })
}
