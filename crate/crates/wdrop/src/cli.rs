//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage errors
//! (bad flags, missing or invalid config).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use wdrop_core::metrics::{self, EvalReport};
use wdrop_core::uncertainty::{self, Method, MethodConfig, TrainedModel};
use wdrop_core::{data, Normalizer, SeededRng};

use crate::bench::{self, SweepParam};
use crate::config::ExperimentConfig;
use crate::csv_io::{self, PredictionTriples};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "wdrop", version, about = "Wasserstein dropout: heteroscedastic uncertainty for regression")]
pub struct Cli {
    /// Suppress progress output on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Train one method on a CSV dataset and save the model as JSON.
    Train(TrainArgs),
    /// Score predictions, either from a CSV of mu,sigma,y or from a saved model.
    Eval(EvalArgs),
    /// Run the benchmark described by a config file.
    Bench(BenchArgs),
    /// Repeat the benchmark for several drop rates or sample counts.
    Sweep(SweepArgs),
    /// Tabulate calibration measures of N(mu, sigma) against N(0, 1).
    Curves(CurvesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    ToyNoise,
    ToyHf,
    NoisyLine,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Noise standard deviation of `noisy-line`.
    #[arg(long, default_value_t = 1.0)]
    pub sigma_true: f64,
    /// Defaults to $WDROP_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Hyper {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Drop rate.
    #[arg(long = "drop-rate", visible_alias = "p")]
    pub drop_rate: Option<f64>,
    /// Sub-networks per W-dropout step.
    #[arg(long = "train-samples", visible_alias = "L")]
    pub train_samples: Option<usize>,
    /// Forward passes at inference.
    #[arg(long = "inference-samples", visible_alias = "T")]
    pub inference_samples: Option<usize>,
    /// Variance offset of MC dropout.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ensemble size.
    #[arg(long, visible_alias = "M")]
    pub members: Option<usize>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
}

impl Hyper {
    fn config(&self, method: Method) -> MethodConfig {
        let mut c = MethodConfig::new(method);
        c.epochs = self.epochs.unwrap_or(c.epochs);
        c.batch_size = self.batch_size.unwrap_or(c.batch_size);
        c.lr = self.lr.unwrap_or(c.lr);
        c.drop_rate = self.drop_rate.unwrap_or(c.drop_rate);
        c.train_samples = self.train_samples.unwrap_or(c.train_samples);
        c.inference_samples = self.inference_samples.unwrap_or(c.inference_samples);
        c.lambda = self.lambda.unwrap_or(c.lambda);
        c.members = self.members.unwrap_or(c.members);
        if let Some(h) = &self.hidden {
            c.hidden = h.clone();
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Target column name.
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub hyper: Hyper,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CSV with columns mu, sigma, y.
    #[arg(long, conflicts_with_all = ["model", "data"])]
    pub predictions: Option<PathBuf>,
    /// Model JSON written by `train`.
    #[arg(long, requires = "data")]
    pub model: Option<PathBuf>,
    /// Data CSV to score the model on.
    #[arg(long, requires = "model")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long, default_value_t = metrics::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the model's predictions (normalized units) as mu,sigma,y.
    #[arg(long, requires = "model")]
    pub predictions_out: Option<PathBuf>,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// List the jobs without training.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = ["p", "L"])]
    pub param: String,
    /// Values to sweep, comma separated; default from the config or the
    /// standard grid.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// `start:stop:count`, or a single value.
    #[arg(long, default_value = "0")]
    pub mu_range: String,
    /// `start:stop:count`, or a single value.
    #[arg(long, default_value = "1")]
    pub sigma_range: String,
    #[arg(long, default_value_t = metrics::DEFAULT_BINS)]
    pub bins: usize,
    /// CSV to write; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {s:?} (expected wdropout, mc, pu, de, pu_de, pu_mc)"))
}

/// Parses `start:stop:count` (inclusive, evenly spaced) or a single number.
pub fn parse_range(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| format!("bad count in range {s:?}"))?;
            match n {
                0 => Err(format!("empty range {s:?}")),
                1 => Ok(vec![a]),
                _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        _ => Err(format!("expected start:stop:count or a number, got {s:?}")),
    }
}

/// What `train` writes: the model plus the standardization it was trained
/// under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub model: TrainedModel,
    pub normalizer: Normalizer,
    pub target: String,
    pub feature_names: Vec<String>,
}

/// A usage problem: exits with code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn seed_or_env(explicit: Option<u64>) -> anyhow::Result<u64> {
    bench::resolve_seed(explicit, None).map_err(|m| UsageError(m).into())
}

fn load_config(path: &Path) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    if !path.is_file() {
        return Err(UsageError(format!("config file not found: {}", path.display())).into());
    }
    let cfg = ExperimentConfig::load(path).map_err(|e| UsageError(e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("results"))
}

fn gen_data(a: GenDataArgs) -> anyhow::Result<()> {
    let mut rng = SeededRng::new(seed_or_env(a.seed)?);
    let ds = match a.kind {
        Kind::ToyNoise => data::gen_toy_noise(a.n, &mut rng),
        Kind::ToyHf => data::gen_toy_hf(a.n, &mut rng),
        Kind::NoisyLine => data::gen_noisy_line(a.n, a.sigma_true, &mut rng),
    }
    .map_err(|e| UsageError(e.to_string()))?;
    csv_io::write_dataset(&a.out, &ds)?;
    Ok(())
}

fn train(a: TrainArgs, quiet: bool) -> anyhow::Result<()> {
    let cfg = a.hyper.config(a.method);
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let loaded = csv_io::load_csv(&a.data, &a.target)?;
    if !loaded.skipped_rows.is_empty() && !quiet {
        eprintln!("warning: skipped rows {:?}", loaded.skipped_rows);
    }
    let norm = Normalizer::fit(&loaded.dataset);
    let train = norm.apply(&loaded.dataset);
    let rng = SeededRng::new(seed_or_env(a.seed)?);
    let every = (cfg.epochs / 10).max(1);
    let model = uncertainty::train_with_observer(&cfg, &train, &rng, |epoch, loss| {
        if !quiet && (epoch % every == 0 || epoch + 1 == cfg.epochs) {
            eprintln!("epoch {epoch}: loss {loss:.6}");
        }
    })
    .context("training failed")?;
    let saved = SavedModel { model, normalizer: norm, target: a.target, feature_names: loaded.feature_names };
    let json = serde_json::to_string(&saved)?;
    report::write_text(&a.out, &json)?;
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let report: EvalReport = if let Some(p) = &a.predictions {
        let t = csv_io::load_predictions(p)?;
        metrics::evaluate_triples(&t.mu, &t.sigma, &t.y, a.bins)?
    } else if let (Some(model_path), Some(data_path)) = (&a.model, &a.data) {
        let text =
            std::fs::read_to_string(model_path).with_context(|| format!("cannot read {}", model_path.display()))?;
        let saved: SavedModel =
            serde_json::from_str(&text).with_context(|| format!("{} is not a saved model", model_path.display()))?;
        let ds = saved.normalizer.apply(&csv_io::load_csv(data_path, &a.target)?.dataset);
        if ds.feature_dim() != saved.model.members[0].input_dim() {
            bail!(
                "{} has {} features, the model expects {}",
                data_path.display(),
                ds.feature_dim(),
                saved.model.members[0].input_dim()
            );
        }
        let pred = saved.model.predict(&ds.features, &mut SeededRng::new(seed_or_env(a.seed)?))?;
        if let Some(out) = &a.predictions_out {
            let t = PredictionTriples {
                mu: pred.mu.as_slice().to_vec(),
                sigma: pred.sigma.as_slice().to_vec(),
                y: ds.targets.as_slice().to_vec(),
            };
            csv_io::write_predictions(out, &t)?;
        }
        metrics::evaluate(&pred, &ds.targets, a.bins)?
    } else {
        return Err(UsageError("eval needs --predictions, or --model with --data".into()).into());
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &a.out {
        Some(p) => report::write_text(p, &json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn run_bench(a: BenchArgs, quiet: bool) -> anyhow::Result<()> {
    let (cfg, base) = load_config(&a.config)?;
    let seed = bench::resolve_seed(a.seed, Some(&cfg)).map_err(UsageError)?;
    if a.dry_run {
        let jobs = bench::dry_run(&cfg, &base, seed)?;
        println!("dataset,method,split,fold,n_train,n_test");
        for j in &jobs {
            println!("{},{},{},{},{},{}", j.dataset, j.method, j.split, j.fold, j.n_train, j.n_test);
        }
        eprintln!("{} jobs", jobs.len());
        return Ok(());
    }
    let out = out_dir(a.out, &cfg);
    let res = bench::run(&cfg, &base, seed, &out, !quiet)?;
    if !quiet {
        eprintln!("wrote {} files to {}", res.files.len(), out.display());
    }
    Ok(())
}

fn run_sweep(a: SweepArgs, quiet: bool) -> anyhow::Result<()> {
    let (cfg, base) = load_config(&a.config)?;
    let seed = bench::resolve_seed(a.seed, Some(&cfg)).map_err(UsageError)?;
    let param = if a.param == "p" { SweepParam::P } else { SweepParam::L };
    let values = bench::sweep_values(param, a.values, &cfg);
    let out = out_dir(a.out, &cfg);
    let runs = bench::sweep(&cfg, &base, seed, param, &values, &out, !quiet).map_err(|e| match e {
        bench::BenchError::Config(c) => anyhow::Error::from(UsageError(c.to_string())),
        other => other.into(),
    })?;
    if !quiet {
        eprintln!("{} summaries under {}", runs.len(), out.join(format!("sweep-{}", param.name())).display());
    }
    Ok(())
}

fn curves(a: CurvesArgs) -> anyhow::Result<()> {
    let mus = parse_range(&a.mu_range).map_err(UsageError)?;
    let sigmas = parse_range(&a.sigma_range).map_err(UsageError)?;
    if sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(UsageError("sigma values must be non-negative".into()).into());
    }
    if a.bins < 2 {
        return Err(UsageError("bins must be at least 2".into()).into());
    }
    let mut csv = String::from("mu,sigma,ws1,ws2,ws2_closed,ece\n");
    for &mu in &mus {
        for &sigma in &sigmas {
            let c = metrics::analytic_curves(mu, sigma, a.bins)?;
            csv.push_str(&format!("{mu},{sigma},{},{},{},{}\n", c.ws1, c.ws2, c.ws2_closed, c.ece));
        }
    }
    match &a.out {
        Some(p) => report::write_text(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

/// Executes a parsed command line.
pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a, quiet),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => run_bench(a, quiet),
        Command::Sweep(a) => run_sweep(a, quiet),
        Command::Curves(a) => curves(a),
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
