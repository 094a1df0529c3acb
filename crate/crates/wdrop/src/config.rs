//! Declarative experiment configuration, read from a flat TOML file.
//!
//! ```toml
//! seed = 7
//! datasets = ["toy-noise", "csv:data/energy.csv:cooling_load"]
//! methods = ["wdropout", "mc"]
//! split = "kfold"
//! folds = 5
//! epochs = 150
//! ```
//!
//! Every key is optional except `datasets` and `methods`. Hyperparameters
//! apply to all listed methods; `lambda` only affects MC dropout.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wdrop_core::experiment::{SplitSpec, STREAM_DATA};
use wdrop_core::uncertainty::{Method, MethodConfig};
use wdrop_core::{data, RegressionDataset, SeededRng, SplitRegime};

use crate::csv_io::{self, CsvError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Syntax { path: PathBuf, source: toml::de::Error },
    #[error("unknown method {0:?} (expected one of wdropout, mc, pu, de, pu_de, pu_mc)")]
    UnknownMethod(String),
    #[error("unknown dataset {0:?} (expected toy-noise, toy-hf, noisy-line or csv:PATH:TARGET)")]
    UnknownDataset(String),
    #[error("unknown split {0:?} (expected kfold or ood)")]
    UnknownSplit(String),
    #[error("unknown regime {0:?} (expected interpolate or extrapolate)")]
    UnknownRegime(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("dataset {name}: {source}")]
    Data { name: String, source: wdrop_core::data::DataError },
}

fn default_n() -> usize {
    2000
}
fn default_split() -> String {
    "kfold".to_string()
}
fn default_folds() -> usize {
    5
}
fn default_chunks() -> usize {
    10
}
fn default_regimes() -> Vec<String> {
    vec!["interpolate".to_string(), "extrapolate".to_string()]
}
fn default_bins() -> usize {
    wdrop_core::metrics::DEFAULT_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed. Falls back to `WDROP_SEED`, then 0.
    pub seed: Option<u64>,
    /// Output directory, relative to the working directory.
    pub out: Option<PathBuf>,
    /// Generator names or `csv:PATH:TARGET`; CSV paths are relative to
    /// the config file.
    pub datasets: Vec<String>,
    /// Points per generated dataset.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Noise level of `noisy-line`.
    #[serde(default)]
    pub sigma_true: f64,
    pub methods: Vec<String>,
    /// `kfold` or `ood` (PCA and label splits).
    #[serde(default = "default_split")]
    pub split: String,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_chunks")]
    pub chunks: usize,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<String>,
    /// Run only the first `fold_limit` folds per split kind and regime.
    pub fold_limit: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    #[serde(alias = "p")]
    pub drop_rate: Option<f64>,
    #[serde(alias = "L")]
    pub train_samples: Option<usize>,
    #[serde(alias = "T")]
    pub inference_samples: Option<usize>,
    pub lambda: Option<f64>,
    #[serde(alias = "M")]
    pub members: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Drop rates for `sweep --param p` without `--values`.
    pub sweep_p: Option<Vec<f64>>,
    /// Sample counts for `sweep --param L` without `--values`.
    pub sweep_l: Option<Vec<usize>>,
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    ToyNoise,
    ToyHf,
    NoisyLine,
    Csv { path: PathBuf, target: String },
}

impl DatasetSource {
    /// `base` resolves relative CSV paths.
    pub fn parse(s: &str, base: &Path) -> Result<Self, ConfigError> {
        Ok(match s {
            "toy-noise" => Self::ToyNoise,
            "toy-hf" => Self::ToyHf,
            "noisy-line" => Self::NoisyLine,
            _ => {
                let rest = s.strip_prefix("csv:").ok_or_else(|| ConfigError::UnknownDataset(s.to_string()))?;
                let (path, target) = rest.rsplit_once(':').ok_or_else(|| ConfigError::UnknownDataset(s.to_string()))?;
                if path.is_empty() || target.is_empty() {
                    return Err(ConfigError::UnknownDataset(s.to_string()));
                }
                Self::Csv { path: base.join(path), target: target.to_string() }
            }
        })
    }
}

pub fn parse_regime(s: &str) -> Result<SplitRegime, ConfigError> {
    match s {
        "interpolate" => Ok(SplitRegime::Interpolate),
        "extrapolate" => Ok(SplitRegime::Extrapolate),
        _ => Err(ConfigError::UnknownRegime(s.to_string())),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self =
            toml::from_str(text).map_err(|source| ConfigError::Syntax { path: path.to_path_buf(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    /// Checks names and method hyperparameters without touching data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.datasets.is_empty() {
            return Err(ConfigError::Invalid("datasets must list at least one dataset".into()));
        }
        for d in &self.datasets {
            DatasetSource::parse(d, Path::new("."))?;
        }
        if self.n == 0 {
            return Err(ConfigError::Invalid("n must be positive".into()));
        }
        if !(self.sigma_true >= 0.0) {
            return Err(ConfigError::Invalid("sigma_true must be non-negative".into()));
        }
        for m in self.method_configs()? {
            m.validate().map_err(|e| ConfigError::Invalid(format!("{}: {e}", m.method)))?;
        }
        self.split_spec()?;
        if matches!(&self.sweep_p, Some(v) if v.is_empty()) || matches!(&self.sweep_l, Some(v) if v.is_empty()) {
            return Err(ConfigError::Invalid("sweep lists must not be empty".into()));
        }
        Ok(())
    }

    pub fn methods(&self) -> Result<Vec<Method>, ConfigError> {
        if self.methods.is_empty() {
            return Err(ConfigError::Invalid("methods must list at least one method".into()));
        }
        self.methods.iter().map(|m| Method::parse(m).ok_or_else(|| ConfigError::UnknownMethod(m.clone()))).collect()
    }

    /// One fully specified configuration per listed method.
    pub fn method_configs(&self) -> Result<Vec<MethodConfig>, ConfigError> {
        Ok(self
            .methods()?
            .into_iter()
            .map(|method| {
                let mut c = MethodConfig::new(method);
                if let Some(v) = self.epochs {
                    c.epochs = v;
                }
                if let Some(v) = self.batch_size {
                    c.batch_size = v;
                }
                if let Some(v) = self.lr {
                    c.lr = v;
                }
                if let Some(v) = self.drop_rate {
                    c.drop_rate = v;
                }
                if let Some(v) = self.train_samples {
                    c.train_samples = v;
                }
                if let Some(v) = self.inference_samples {
                    c.inference_samples = v;
                }
                if let (Some(v), Method::Mc) = (self.lambda, method) {
                    c.lambda = v;
                }
                if let Some(v) = self.members {
                    c.members = v;
                }
                if let Some(v) = &self.hidden {
                    c.hidden = v.clone();
                }
                c
            })
            .collect())
    }

    pub fn split_spec(&self) -> Result<SplitSpec, ConfigError> {
        let mut spec = match self.split.as_str() {
            "kfold" => {
                if self.folds < 2 {
                    return Err(ConfigError::Invalid("folds must be at least 2".into()));
                }
                SplitSpec::kfold(self.folds)
            }
            "ood" => {
                if self.chunks < 3 {
                    return Err(ConfigError::Invalid("chunks must be at least 3".into()));
                }
                let regimes = self.regimes.iter().map(|r| parse_regime(r)).collect::<Result<Vec<_>, _>>()?;
                if regimes.is_empty() {
                    return Err(ConfigError::Invalid("regimes must not be empty".into()));
                }
                SplitSpec::ood(self.chunks, regimes)
            }
            other => return Err(ConfigError::UnknownSplit(other.to_string())),
        };
        spec.fold_limit = self.fold_limit;
        Ok(spec)
    }

    /// Builds every dataset. Generated data draws from `[index, STREAM_DATA]`
    /// of the master seed; CSV paths resolve against `base`.
    pub fn load_datasets(&self, seed: u64, base: &Path) -> Result<Vec<RegressionDataset>, ConfigError> {
        let master = SeededRng::new(seed);
        self.datasets
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut rng = master.derive(&[i as u64, STREAM_DATA]);
                let wrap = |source| ConfigError::Data { name: spec.clone(), source };
                match DatasetSource::parse(spec, base)? {
                    DatasetSource::ToyNoise => data::gen_toy_noise(self.n, &mut rng).map_err(wrap),
                    DatasetSource::ToyHf => data::gen_toy_hf(self.n, &mut rng).map_err(wrap),
                    DatasetSource::NoisyLine => data::gen_noisy_line(self.n, self.sigma_true, &mut rng).map_err(wrap),
                    DatasetSource::Csv { path, target } => {
                        let loaded = csv_io::load_csv(&path, &target)?;
                        if !loaded.skipped_rows.is_empty() {
                            eprintln!(
                                "warning: {}: skipped {} row(s) with non-numeric cells: {:?}",
                                path.display(),
                                loaded.skipped_rows.len(),
                                loaded.skipped_rows
                            );
                        }
                        Ok(loaded.dataset)
                    }
                }
            })
            .collect()
    }
}
