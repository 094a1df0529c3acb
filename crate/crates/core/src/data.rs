//! Datasets, standardization, toy generators and train/test split plans.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::math;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("dataset has no rows")]
    Empty,
    #[error("features have {features} rows but targets have {targets}")]
    RowMismatch { features: usize, targets: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("cannot build {k} folds from {n} points")]
    InvalidFolds { k: usize, n: usize },
    #[error("ordered splits need at least 3 chunks, got {0}")]
    TooFewChunks(usize),
    #[error("{n} points cannot fill {chunks} chunks")]
    TooFewPoints { n: usize, chunks: usize },
    #[error("fold {fold} is not a valid {regime} chunk for {chunks} chunks")]
    FoldOutOfRange { fold: usize, regime: SplitRegime, chunks: usize },
    #[error("principal component undefined: data is constant")]
    ConstantData,
    #[error("need at least 2 points for a principal component")]
    TooFewRows,
    #[error("noise level must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("split plan is not a partition: {0}")]
    NotAPartition(&'static str),
}

/// Feature matrix `N × d`, targets `N × m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    pub name: String,
    pub features: Matrix,
    pub targets: Matrix,
    /// Standardization already applied to the stored values, if any.
    pub normalizer: Option<Normalizer>,
}

impl RegressionDataset {
    pub fn new(name: impl Into<String>, features: Matrix, targets: Matrix) -> Result<Self, DataError> {
        if features.rows() != targets.rows() {
            return Err(DataError::RowMismatch { features: features.rows(), targets: targets.rows() });
        }
        if features.rows() == 0 {
            return Err(DataError::Empty);
        }
        for m in [&features, &targets] {
            if let Some(i) = m.as_slice().iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { row: i / m.cols().max(1), col: i % m.cols().max(1) });
            }
        }
        Ok(Self { name: name.into(), features, targets, normalizer: None })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn target_dim(&self) -> usize {
        self.targets.cols()
    }

    /// Rows by index, keeping the name and normalization record.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            features: self.features.select_rows(idx),
            targets: self.targets.select_rows(idx),
            normalizer: self.normalizer.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: Vec<f64>,
    /// Population standard deviations; constant columns are stored as 1.
    pub std: Vec<f64>,
}

impl ColumnScaling {
    fn fit(m: &Matrix) -> Self {
        let n = m.rows() as f64;
        let mut mean = vec![0.0; m.cols()];
        let mut std = vec![0.0; m.cols()];
        for c in 0..m.cols() {
            let col = m.col(c);
            let mu = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let s = math::sqrt(var);
            mean[c] = mu;
            std[c] = if s > 1e-12 * mu.abs().max(1.0) { s } else { 1.0 };
        }
        Self { mean, std }
    }

    fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        out
    }

    fn invert(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.std[c] + self.mean[c];
            }
        }
        out
    }
}

/// Per-column standardization of features and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub features: ColumnScaling,
    pub targets: ColumnScaling,
}

impl Normalizer {
    /// Fitted on the training split only; the caller never hands it test rows.
    pub fn fit(train: &RegressionDataset) -> Self {
        Self { features: ColumnScaling::fit(&train.features), targets: ColumnScaling::fit(&train.targets) }
    }

    pub fn apply(&self, data: &RegressionDataset) -> RegressionDataset {
        RegressionDataset {
            name: data.name.clone(),
            features: self.features.apply(&data.features),
            targets: self.targets.apply(&data.targets),
            normalizer: Some(self.clone()),
        }
    }

    pub fn invert(&self, data: &RegressionDataset) -> RegressionDataset {
        RegressionDataset {
            name: data.name.clone(),
            features: self.features.invert(&data.features),
            targets: self.targets.invert(&data.targets),
            normalizer: None,
        }
    }

    pub fn apply_features(&self, x: &Matrix) -> Matrix {
        self.features.apply(x)
    }

    pub fn invert_targets(&self, y: &Matrix) -> Matrix {
        self.targets.invert(y)
    }
}

/// Noise standard deviation of the toy-noise data at `x`: `exp(-0.01 x²)`,
/// i.e. variance `exp(-0.02 x²)`.
pub fn toy_noise_std(x: f64) -> f64 {
    math::exp(-0.01 * x * x)
}

/// `0.25x² - 0.01x³ + 40·exp(-(x+1)²/200)·sin(3x)`.
pub fn toy_hf(x: f64) -> f64 {
    0.25 * x * x - 0.01 * x * x * x + 40.0 * math::exp(-(x + 1.0) * (x + 1.0) / 200.0) * math::sin(3.0 * x)
}

fn standardized(name: &str, xs: Vec<f64>, ys: Vec<f64>) -> RegressionDataset {
    let raw = RegressionDataset::new(name, Matrix::column(&xs), Matrix::column(&ys)).expect("finite generator output");
    let norm = Normalizer::fit(&raw);
    norm.apply(&raw)
}

/// Heteroscedastic white noise: `x ~ U(-15, 15)`, `y ~ N(0, exp(-0.02x²))`,
/// both standardized. The applied [`Normalizer`] is kept on the dataset.
pub fn gen_toy_noise(n: usize, rng: &mut SeededRng) -> Result<RegressionDataset, DataError> {
    if n == 0 {
        return Err(DataError::Empty);
    }
    let xs: Vec<f64> = (0..n).map(|_| rng.uniform_range(-15.0, 15.0)).collect();
    let ys = xs.iter().map(|&x| toy_noise_std(x) * rng.standard_normal()).collect();
    Ok(standardized("toy-noise", xs, ys))
}

/// Noise-free high-frequency target [`toy_hf`] on `x ~ U(-15, 20)`,
/// standardized.
pub fn gen_toy_hf(n: usize, rng: &mut SeededRng) -> Result<RegressionDataset, DataError> {
    if n == 0 {
        return Err(DataError::Empty);
    }
    let xs: Vec<f64> = (0..n).map(|_| rng.uniform_range(-15.0, 20.0)).collect();
    let ys = xs.iter().map(|&x| toy_hf(x)).collect();
    Ok(standardized("toy-hf", xs, ys))
}

/// `x ~ U(-1, 1)`, `y ~ N(0, σ_true)`; left unnormalized.
pub fn gen_noisy_line(n: usize, sigma_true: f64, rng: &mut SeededRng) -> Result<RegressionDataset, DataError> {
    if n == 0 {
        return Err(DataError::Empty);
    }
    if !(sigma_true >= 0.0) {
        return Err(DataError::NegativeSigma(sigma_true));
    }
    let xs: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let ys: Vec<f64> = (0..n)
        .map(|_| {
            let z = rng.standard_normal();
            if sigma_true == 0.0 {
                0.0
            } else {
                sigma_true * z
            }
        })
        .collect();
    RegressionDataset::new("noisy-line", Matrix::column(&xs), Matrix::column(&ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    IidKfold,
    Pca,
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRegime {
    /// Random folds.
    Iid,
    /// Held-out chunk is an inner chunk of the ordering.
    Interpolate,
    /// Held-out chunk is the first or last chunk of the ordering.
    Extrapolate,
}

impl fmt::Display for SplitRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitRegime::Iid => "iid",
            SplitRegime::Interpolate => "interpolate",
            SplitRegime::Extrapolate => "extrapolate",
        })
    }
}

/// Disjoint train/test index sets covering a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub regime: SplitRegime,
    /// Fold number for k-fold, chunk index for ordered splits.
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitPlan {
    /// Checks that train and test partition `0..n`.
    pub fn validate(&self, n: usize) -> Result<(), DataError> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n {
                return Err(DataError::NotAPartition("index out of range"));
            }
            if core::mem::replace(&mut seen[i], true) {
                return Err(DataError::NotAPartition("index assigned twice"));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(DataError::NotAPartition("index not assigned"));
        }
        Ok(())
    }

    /// e.g. `iid`, `pca-extrapolate`, `label-interpolate`.
    pub fn label(&self) -> String {
        split_label(self.kind, self.regime)
    }
}

pub fn split_label(kind: SplitKind, regime: SplitRegime) -> String {
    use alloc::format;
    match kind {
        SplitKind::IidKfold => String::from("iid"),
        SplitKind::Pca => format!("pca-{regime}"),
        SplitKind::Label => format!("label-{regime}"),
    }
}

/// Shuffled k-fold partition; fold sizes differ by at most one.
pub fn kfold(n: usize, k: usize, rng: &mut SeededRng) -> Result<Vec<SplitPlan>, DataError> {
    if k < 2 || k > n {
        return Err(DataError::InvalidFolds { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let bounds = chunk_bounds(n, k);
    Ok(bounds
        .iter()
        .enumerate()
        .map(|(fold, &(lo, hi))| {
            let mut test = order[lo..hi].to_vec();
            let mut train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            test.sort_unstable();
            train.sort_unstable();
            SplitPlan { kind: SplitKind::IidKfold, regime: SplitRegime::Iid, fold, train, test }
        })
        .collect())
}

/// `[lo, hi)` of `chunks` consecutive chunks; the first `n % chunks` chunks
/// take one extra element.
fn chunk_bounds(n: usize, chunks: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (n / chunks, n % chunks);
    let mut lo = 0;
    (0..chunks)
        .map(|c| {
            let hi = lo + base + usize::from(c < extra);
            let b = (lo, hi);
            lo = hi;
            b
        })
        .collect()
}

/// Chunk indices valid as test chunks for a regime.
pub fn regime_folds(n_chunks: usize, regime: SplitRegime) -> Vec<usize> {
    match regime {
        SplitRegime::Extrapolate => vec![0, n_chunks - 1],
        SplitRegime::Interpolate => (1..n_chunks - 1).collect(),
        SplitRegime::Iid => (0..n_chunks).collect(),
    }
}

/// Orders points by `scores`, cuts them into `n_chunks` near-equal chunks
/// (lowest scores first) and holds out chunk `fold`.
///
/// Extrapolation accepts the two outer chunks (`0` and `n_chunks - 1`),
/// interpolation the inner ones.
pub fn ordered_split(
    scores: &[f64],
    kind: SplitKind,
    n_chunks: usize,
    regime: SplitRegime,
    fold: usize,
) -> Result<SplitPlan, DataError> {
    if n_chunks < 3 {
        return Err(DataError::TooFewChunks(n_chunks));
    }
    let n = scores.len();
    if n < n_chunks {
        return Err(DataError::TooFewPoints { n, chunks: n_chunks });
    }
    let valid = match regime {
        SplitRegime::Extrapolate => fold == 0 || fold == n_chunks - 1,
        SplitRegime::Interpolate => fold >= 1 && fold < n_chunks - 1,
        SplitRegime::Iid => false,
    };
    if !valid {
        return Err(DataError::FoldOutOfRange { fold, regime, chunks: n_chunks });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (lo, hi) = chunk_bounds(n, n_chunks)[fold];
    let mut test = order[lo..hi].to_vec();
    let mut train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
    test.sort_unstable();
    train.sort_unstable();
    Ok(SplitPlan { kind, regime, fold, train, test })
}

/// Dominant eigenvector of the centered covariance of `x`, by power
/// iteration (tolerance 1e-9, at most 10⁴ iterations). The sign is fixed so
/// the largest-magnitude coordinate is positive.
pub fn pca_first_component(x: &Matrix) -> Result<Vec<f64>, DataError> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(DataError::TooFewRows);
    }
    let means: Vec<f64> = (0..d).map(|c| x.col(c).iter().sum::<f64>() / n as f64).collect();
    let mut cov = vec![0.0; d * d];
    for r in 0..n {
        let row = x.row(r);
        for i in 0..d {
            let a = row[i] - means[i];
            for j in i..d {
                cov[i * d + j] += a * (row[j] - means[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= n as f64;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let scale = means.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if !(trace > 1e-24 * scale * scale) {
        return Err(DataError::ConstantData);
    }
    let mat_vec = |v: &[f64]| -> Vec<f64> { (0..d).map(|i| crate::linalg::dot(&cov[i * d..(i + 1) * d], v)).collect() };
    let normalize = |v: &mut Vec<f64>| {
        let norm = math::sqrt(crate::linalg::dot(v, v));
        v.iter_mut().for_each(|e| *e /= norm);
        norm
    };

    // Two starts guard against a start orthogonal to the dominant direction:
    // the highest-variance axis pushed through the covariance, and a fixed
    // irregular vector.
    let j = (0..d).max_by(|&a, &b| cov[a * d + a].total_cmp(&cov[b * d + b])).unwrap_or(0);
    let mut axis = vec![0.0; d];
    axis[j] = 1.0;
    let starts = [mat_vec(&axis), (0..d).map(|i| 1.0 + 0.618_033_988_7 * i as f64).collect::<Vec<_>>()];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mut v in starts {
        if normalize(&mut v) == 0.0 {
            continue;
        }
        for _ in 0..10_000 {
            let mut next = mat_vec(&v);
            if normalize(&mut next) == 0.0 {
                break;
            }
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if delta < 1e-9 {
                break;
            }
        }
        let rayleigh = crate::linalg::dot(&v, &mat_vec(&v));
        if best.as_ref().is_none_or(|(r, _)| rayleigh > *r) {
            best = Some((rayleigh, v));
        }
    }
    let (_, mut v) = best.ok_or(DataError::ConstantData)?;
    let lead = (0..d).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|e| *e = -*e);
    }
    Ok(v)
}

/// Projections of the rows of `x` on its first principal component.
pub fn pca_scores(x: &Matrix) -> Result<Vec<f64>, DataError> {
    let dir = pca_first_component(x)?;
    Ok((0..x.rows()).map(|r| crate::linalg::dot(x.row(r), &dir)).collect())
}
