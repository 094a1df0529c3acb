//! Training objectives and predictive distributions.
//!
//! W-dropout fits the spread of sub-network predictions to the data: for
//! `L` sampled sub-networks with outputs `f_1..f_L` at an input with target
//! `y`, mean `μ` and population standard deviation `σ`, the per-coordinate
//! loss is
//!
//! ```text
//! (μ - y)² + (σ - √((μ - y)² + σ²))²
//! ```
//!
//! i.e. the squared 2-Wasserstein distance between `N(μ, σ)` and a Gaussian
//! centred on `y` whose variance is the expected squared error of the
//! sub-networks. Gradients flow through both `μ` and `σ`.
//!
//! Baselines: MC dropout (MSE training, sample variance plus an offset λ),
//! PU (Gaussian NLL head), DE (ensemble of MSE networks), PU-DE (ensemble
//! of PU networks) and PU-MC (dropout samples of a PU network).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::data::RegressionDataset;
use crate::linalg::Matrix;
use crate::math;
use crate::nn::{AdamState, DropoutMask, Gradients, Head, Masking, Mlp, NnError};
use crate::rng::SeededRng;

/// Lower bound added to the softplus variance of Gaussian heads.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UncertaintyError {
    #[error("empty sample")]
    EmptySample,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("standard deviations must be non-negative")]
    NegativeSigma,
    #[error("non-finite input")]
    NonFinite,
    #[error("shape mismatch")]
    Shape,
    #[error("invalid method config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: u64, loss: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Per-coordinate mean and population variance (divisor `L`).
pub fn sample_stats(samples: &[f64]) -> Result<(f64, f64), UncertaintyError> {
    if samples.is_empty() {
        return Err(UncertaintyError::EmptySample);
    }
    Ok(mean_var(samples))
}

/// Two-pass mean and population variance. A constant sample yields its
/// value and exactly zero variance; the rounded mean of identical values
/// can be off by an ulp, which would otherwise leave a spurious tiny σ.
fn mean_var(samples: &[f64]) -> (f64, f64) {
    let first = samples[0];
    if samples.iter().all(|&f| f == first) {
        return (first, 0.0);
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|f| (f - mu) * (f - mu)).sum::<f64>() / n;
    (mu, var)
}

/// Column-wise [`sample_stats`] over an `L × m` matrix of sub-network outputs.
pub fn sample_stats_columns(samples: &Matrix) -> Result<(Vec<f64>, Vec<f64>), UncertaintyError> {
    if samples.rows() == 0 {
        return Err(UncertaintyError::EmptySample);
    }
    let (mut mu, mut var) = (Vec::with_capacity(samples.cols()), Vec::with_capacity(samples.cols()));
    for c in 0..samples.cols() {
        let (m, v) = sample_stats(&samples.col(c))?;
        mu.push(m);
        var.push(v);
    }
    Ok((mu, var))
}

/// W-dropout loss of one output coordinate.
pub fn wdropout_loss(samples: &[f64], y: f64) -> Result<f64, UncertaintyError> {
    if samples.len() < 2 {
        return Err(UncertaintyError::TooFewSamples { needed: 2, got: samples.len() });
    }
    if !y.is_finite() || samples.iter().any(|f| !f.is_finite()) {
        return Err(UncertaintyError::NonFinite);
    }
    let (mu, var) = sample_stats(samples)?;
    Ok(wdropout_point(mu, var, y))
}

/// W-dropout loss summed over the `m` columns of an `L × m` sample.
pub fn wdropout_loss_multi(samples: &Matrix, y: &[f64]) -> Result<f64, UncertaintyError> {
    if samples.cols() != y.len() {
        return Err(UncertaintyError::Shape);
    }
    (0..y.len()).map(|c| wdropout_loss(&samples.col(c), y[c])).sum()
}

#[inline]
fn wdropout_point(mu: f64, var: f64, y: f64) -> f64 {
    let d = mu - y;
    let sigma = math::sqrt(var);
    let s = math::sqrt(d * d + var);
    d * d + (sigma - s) * (sigma - s)
}

/// Squared 2-Wasserstein distance between `N(mu1, sigma1)` and `N(mu2, sigma2)`.
pub fn ws2_squared_gaussians(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<f64, UncertaintyError> {
    if sigma1 < 0.0 || sigma2 < 0.0 {
        return Err(UncertaintyError::NegativeSigma);
    }
    Ok((mu1 - mu2) * (mu1 - mu2) + (sigma1 - sigma2) * (sigma1 - sigma2))
}

/// Variance of a Gaussian head's raw scale output.
#[inline]
pub fn head_variance(raw_scale: f64) -> f64 {
    math::softplus(raw_scale) + VARIANCE_FLOOR
}

/// Gaussian negative log-likelihood without the `log √(2π)` constant.
#[inline]
pub fn gaussian_nll(mu: f64, var: f64, y: f64) -> f64 {
    0.5 * math::ln(var) + (mu - y) * (mu - y) / (2.0 * var)
}

/// Batch-mean NLL of a Gaussian head given raw scale outputs.
pub fn gaussian_nll_loss(mu: &[f64], raw_scale: &[f64], y: &[f64]) -> Result<f64, UncertaintyError> {
    if mu.len() != raw_scale.len() || mu.len() != y.len() {
        return Err(UncertaintyError::Shape);
    }
    if mu.is_empty() {
        return Err(UncertaintyError::EmptySample);
    }
    let total: f64 = mu.iter().zip(raw_scale).zip(y).map(|((&m, &r), &t)| gaussian_nll(m, head_variance(r), t)).sum();
    Ok(total / mu.len() as f64)
}

/// A differentiable batch objective: loss value plus the adjoint of each
/// forward pass's raw output.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub adjoints: Vec<Matrix>,
}

/// Batch-mean of the summed squared error, for one pass.
pub fn mse_objective(output: &Matrix, y: &Matrix) -> Result<LossGrad, UncertaintyError> {
    if output.shape() != y.shape() || y.rows() == 0 {
        return Err(UncertaintyError::Shape);
    }
    let b = y.rows() as f64;
    let mut adj = Matrix::zeros(y.rows(), y.cols());
    let mut loss = 0.0;
    for ((a, &f), &t) in adj.as_mut_slice().iter_mut().zip(output.as_slice()).zip(y.as_slice()) {
        let d = f - t;
        loss += d * d;
        *a = 2.0 * d / b;
    }
    Ok(LossGrad { loss: loss / b, adjoints: vec![adj] })
}

/// Batch-mean Gaussian NLL for a head emitting `[μ_1..μ_m, raw_1..raw_m]`.
pub fn nll_objective(output: &Matrix, y: &Matrix) -> Result<LossGrad, UncertaintyError> {
    let m = y.cols();
    if output.rows() != y.rows() || output.cols() != 2 * m || y.rows() == 0 {
        return Err(UncertaintyError::Shape);
    }
    let b = y.rows() as f64;
    let mut adj = Matrix::zeros(output.rows(), output.cols());
    let mut loss = 0.0;
    for r in 0..y.rows() {
        let out = output.row(r);
        let a = adj.row_mut(r);
        for k in 0..m {
            let (mu, raw, t) = (out[k], out[m + k], y.get(r, k));
            let var = head_variance(raw);
            let d = mu - t;
            loss += gaussian_nll(mu, var, t);
            a[k] = d / var / b;
            let d_var = 0.5 / var - d * d / (2.0 * var * var);
            a[m + k] = d_var * math::sigmoid(raw) / b;
        }
    }
    Ok(LossGrad { loss: loss / b, adjoints: vec![adj] })
}

/// Batch-mean W-dropout loss over `L` passes, each `batch × m`.
pub fn wdropout_objective(outputs: &[Matrix], y: &Matrix) -> Result<LossGrad, UncertaintyError> {
    let l = outputs.len();
    if l < 2 {
        return Err(UncertaintyError::TooFewSamples { needed: 2, got: l });
    }
    if y.rows() == 0 || outputs.iter().any(|o| o.shape() != y.shape()) {
        return Err(UncertaintyError::Shape);
    }
    let (b, lf) = (y.rows() as f64, l as f64);
    let mut adjoints = vec![Matrix::zeros(y.rows(), y.cols()); l];
    let mut loss = 0.0;
    let mut f = vec![0.0; l];
    for idx in 0..y.as_slice().len() {
        for (fl, o) in f.iter_mut().zip(outputs) {
            *fl = o.as_slice()[idx];
        }
        let t = y.as_slice()[idx];
        let (mu, var) = mean_var(&f);
        let sigma = math::sqrt(var);
        let d = mu - t;
        let s = math::sqrt(d * d + var);
        loss += d * d + (sigma - s) * (sigma - s);
        // Ratio σ/s ≤ 1; at s = 0 both d and σ vanish and the ratio's value
        // is irrelevant.
        let ratio = if s > 0.0 { sigma / s } else { 0.0 };
        let d_mu = 2.0 * d * (2.0 - ratio);
        let d_sigma = -2.0 * (s - sigma) * (1.0 - ratio);
        for (adj, &fl) in adjoints.iter_mut().zip(&f) {
            let through_sigma = if sigma > 0.0 { d_sigma * (fl - mu) / (lf * sigma) } else { 0.0 };
            adj.as_mut_slice()[idx] = (d_mu / lf + through_sigma) / b;
        }
    }
    Ok(LossGrad { loss: loss / b, adjoints })
}

/// Uncertainty method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wdropout,
    Mc,
    Pu,
    De,
    PuDe,
    PuMc,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Wdropout, Method::Mc, Method::Pu, Method::De, Method::PuDe, Method::PuMc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Wdropout => "wdropout",
            Method::Mc => "mc",
            Method::Pu => "pu",
            Method::De => "de",
            Method::PuDe => "pu_de",
            Method::PuMc => "pu_mc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm: String = s.chars().map(|c| if c == '-' { '_' } else { c.to_ascii_lowercase() }).collect();
        Self::ALL.into_iter().find(|m| m.name() == norm || (norm == "w_dropout" && *m == Method::Wdropout))
    }

    pub fn head(self) -> Head {
        match self {
            Method::Pu | Method::PuDe | Method::PuMc => Head::Gaussian,
            _ => Head::Point,
        }
    }

    /// Whether members train with dropout active.
    pub fn trains_with_dropout(self) -> bool {
        matches!(self, Method::Wdropout | Method::Mc | Method::PuMc)
    }

    pub fn is_ensemble(self) -> bool {
        matches!(self, Method::De | Method::PuDe)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    /// Drop rate `p` for dropout-trained methods.
    pub drop_rate: f64,
    /// Sub-networks `L` per optimization step (W-dropout).
    pub train_samples: usize,
    /// Forward passes `T` at inference for sampling methods.
    pub inference_samples: usize,
    /// Offset λ added to the MC dropout variance.
    pub lambda: f64,
    /// Ensemble size `M`.
    pub members: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            drop_rate: 0.1,
            train_samples: 5,
            inference_samples: 50,
            lambda: if method == Method::Mc { 1e-6 } else { 0.0 },
            members: 5,
            hidden: vec![50, 50],
            epochs: 150,
            batch_size: 100,
            lr: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<(), UncertaintyError> {
        let bad = |msg: &str| Err(UncertaintyError::InvalidConfig(String::from(msg)));
        if !(0.0..1.0).contains(&self.drop_rate) {
            return bad("drop rate must lie in [0, 1)");
        }
        if self.method == Method::Wdropout && self.train_samples < 2 {
            return bad("W-dropout needs at least 2 sub-networks per step");
        }
        if matches!(self.method, Method::Wdropout | Method::Mc | Method::PuMc) && self.inference_samples < 2 {
            return bad("sampling inference needs at least 2 passes");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if self.members < 1 || (self.method == Method::De && self.members < 2) {
            return bad("ensemble needs members (DE at least 2)");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("at least one non-empty hidden layer required");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }

    fn member_count(&self) -> usize {
        if self.method.is_ensemble() {
            self.members
        } else {
            1
        }
    }
}

/// Per-point Gaussian predictive estimates, `N × m` each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mu: Matrix,
    pub sigma: Matrix,
}

impl PredictiveDistribution {
    pub fn new(mu: Matrix, sigma: Matrix) -> Result<Self, UncertaintyError> {
        if mu.shape() != sigma.shape() {
            return Err(UncertaintyError::Shape);
        }
        if sigma.as_slice().iter().any(|s| !(*s >= 0.0)) {
            return Err(UncertaintyError::NegativeSigma);
        }
        Ok(Self { mu, sigma })
    }

    pub fn len(&self) -> usize {
        self.mu.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.rows() == 0
    }
}

/// Trained network(s) plus what is needed to turn them into predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: MethodConfig,
    pub members: Vec<Mlp>,
}

impl TrainedModel {
    pub fn predict(&self, x: &Matrix, rng: &mut SeededRng) -> Result<PredictiveDistribution, UncertaintyError> {
        let cfg = &self.config;
        match cfg.method {
            Method::Wdropout => predict_dropout(&self.members[0], x, cfg.inference_samples, 0.0, rng),
            Method::Mc => predict_dropout(&self.members[0], x, cfg.inference_samples, cfg.lambda, rng),
            Method::Pu => predict_gaussian_head(&self.members[0], x, Masking::Full),
            Method::PuMc => {
                let net = &self.members[0];
                let passes = (0..cfg.inference_samples)
                    .map(|_| {
                        let masks: Vec<DropoutMask> = (0..x.rows()).map(|_| DropoutMask::sample(net, rng)).collect();
                        predict_gaussian_head(net, x, Masking::PerRow(&masks))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                predict_ensemble(&passes, EnsembleKind::Mixture)
            }
            Method::De => {
                let preds = self
                    .members
                    .iter()
                    .map(|net| {
                        let out = net.forward_batch(x, Masking::Full)?;
                        let zeros = Matrix::zeros(x.rows(), net.output_dim());
                        PredictiveDistribution::new(out.output().clone(), zeros)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                predict_ensemble(&preds, EnsembleKind::Mean)
            }
            Method::PuDe => {
                let preds = self
                    .members
                    .iter()
                    .map(|net| predict_gaussian_head(net, x, Masking::Full))
                    .collect::<Result<Vec<_>, _>>()?;
                predict_ensemble(&preds, EnsembleKind::Mixture)
            }
        }
    }
}

fn predict_gaussian_head(
    net: &Mlp,
    x: &Matrix,
    masking: Masking<'_>,
) -> Result<PredictiveDistribution, UncertaintyError> {
    let m = net.output_dim();
    let tape = net.forward_batch(x, masking)?;
    let out = tape.output();
    let mut mu = Matrix::zeros(x.rows(), m);
    let mut sigma = Matrix::zeros(x.rows(), m);
    for r in 0..x.rows() {
        for k in 0..m {
            mu.set(r, k, out.get(r, k));
            sigma.set(r, k, math::sqrt(head_variance(out.get(r, m + k))));
        }
    }
    PredictiveDistribution::new(mu, sigma)
}

/// `T` sub-network passes per input (independent masks per row and pass);
/// `μ` is the sample mean, `σ² = population variance + λ`.
pub fn predict_dropout(
    model: &Mlp,
    x: &Matrix,
    passes: usize,
    lambda: f64,
    rng: &mut SeededRng,
) -> Result<PredictiveDistribution, UncertaintyError> {
    if passes < 2 {
        return Err(UncertaintyError::TooFewSamples { needed: 2, got: passes });
    }
    if model.head() != Head::Point {
        return Err(UncertaintyError::InvalidConfig(String::from("dropout sampling expects a point head")));
    }
    let outputs = (0..passes)
        .map(|_| {
            let masks: Vec<DropoutMask> = (0..x.rows()).map(|_| DropoutMask::sample(model, rng)).collect();
            model.forward_batch(x, Masking::PerRow(&masks)).map(|t| t.output().clone())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (n, m) = (x.rows(), model.output_dim());
    let mut mu = Matrix::zeros(n, m);
    let mut sigma = Matrix::zeros(n, m);
    let mut col = vec![0.0; passes];
    for idx in 0..n * m {
        for (c, o) in col.iter_mut().zip(&outputs) {
            *c = o.as_slice()[idx];
        }
        let (mean, var) = sample_stats(&col)?;
        mu.as_mut_slice()[idx] = mean;
        sigma.as_mut_slice()[idx] = math::sqrt(var + lambda);
    }
    PredictiveDistribution::new(mu, sigma)
}

/// How member predictions combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    /// Spread of member means only (DE).
    Mean,
    /// Moments of the equal-weight Gaussian mixture (PU-DE, PU-MC).
    Mixture,
}

pub fn predict_ensemble(
    members: &[PredictiveDistribution],
    kind: EnsembleKind,
) -> Result<PredictiveDistribution, UncertaintyError> {
    let first = members.first().ok_or(UncertaintyError::EmptySample)?;
    if kind == EnsembleKind::Mean && members.len() < 2 {
        return Err(UncertaintyError::TooFewSamples { needed: 2, got: members.len() });
    }
    if members.iter().any(|p| p.mu.shape() != first.mu.shape()) {
        return Err(UncertaintyError::Shape);
    }
    let (n, m) = first.mu.shape();
    let count = members.len() as f64;
    let mut mu = Matrix::zeros(n, m);
    let mut sigma = Matrix::zeros(n, m);
    for idx in 0..n * m {
        let mean = members.iter().map(|p| p.mu.as_slice()[idx]).sum::<f64>() / count;
        let spread = members
            .iter()
            .map(|p| {
                let d = p.mu.as_slice()[idx] - mean;
                d * d
            })
            .sum::<f64>()
            / count;
        let var = match kind {
            EnsembleKind::Mean => spread,
            EnsembleKind::Mixture => {
                spread
                    + members
                        .iter()
                        .map(|p| {
                            let s = p.sigma.as_slice()[idx];
                            s * s
                        })
                        .sum::<f64>()
                        / count
            }
        };
        mu.as_mut_slice()[idx] = mean;
        sigma.as_mut_slice()[idx] = math::sqrt(var);
    }
    PredictiveDistribution::new(mu, sigma)
}

/// Trains the network(s) of `cfg` on an already normalized dataset.
///
/// Ensemble member `k` initializes and shuffles from `rng.derive(&[k])`.
pub fn train(cfg: &MethodConfig, data: &RegressionDataset, rng: &SeededRng) -> Result<TrainedModel, UncertaintyError> {
    train_with_observer(cfg, data, rng, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean batch loss)` per epoch.
pub fn train_with_observer(
    cfg: &MethodConfig,
    data: &RegressionDataset,
    rng: &SeededRng,
    mut observe: impl FnMut(usize, f64),
) -> Result<TrainedModel, UncertaintyError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(UncertaintyError::EmptySample);
    }
    let members = (0..cfg.member_count())
        .map(|k| fit_member(cfg, data, &mut rng.derive(&[k as u64]), &mut observe))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrainedModel { config: cfg.clone(), members })
}

fn fit_member(
    cfg: &MethodConfig,
    data: &RegressionDataset,
    rng: &mut SeededRng,
    observe: &mut impl FnMut(usize, f64),
) -> Result<Mlp, UncertaintyError> {
    let (x, y) = (&data.features, &data.targets);
    let mut sizes = Vec::with_capacity(cfg.hidden.len() + 2);
    sizes.push(x.cols());
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(y.cols());
    let p = if cfg.method.trains_with_dropout() { cfg.drop_rate } else { 0.0 };
    let mut net = Mlp::new(&sizes, cfg.method.head(), p, rng)?;
    let mut adam = AdamState::for_model(&net, cfg.lr);
    let mut grads = Gradients::zeros_like(&net);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select_rows(chunk);
            let yb = y.select_rows(chunk);
            grads.reset();
            let loss = match cfg.method {
                Method::Wdropout => {
                    let tapes = (0..cfg.train_samples)
                        .map(|_| {
                            let mask = DropoutMask::sample(&net, rng);
                            net.forward_batch(&xb, Masking::Shared(&mask))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let outs: Vec<Matrix> = tapes.iter().map(|t| t.output().clone()).collect();
                    let lg = wdropout_objective(&outs, &yb)?;
                    for (tape, adj) in tapes.iter().zip(&lg.adjoints) {
                        net.backward(tape, adj, &mut grads)?;
                    }
                    lg.loss
                }
                _ => {
                    let masks: Vec<DropoutMask>;
                    let masking = if p > 0.0 {
                        masks = (0..chunk.len()).map(|_| DropoutMask::sample(&net, rng)).collect();
                        Masking::PerRow(&masks)
                    } else {
                        Masking::Full
                    };
                    let tape = net.forward_batch(&xb, masking)?;
                    let lg = match cfg.method.head() {
                        Head::Point => mse_objective(tape.output(), &yb)?,
                        Head::Gaussian => nll_objective(tape.output(), &yb)?,
                    };
                    net.backward(&tape, &lg.adjoints[0], &mut grads)?;
                    lg.loss
                }
            };
            if !loss.is_finite() {
                return Err(UncertaintyError::Diverged { step, loss });
            }
            adam.step(&mut net, &grads).map_err(|e| match e {
                NnError::NonFiniteGradient { .. } => UncertaintyError::Diverged { step, loss },
                other => other.into(),
            })?;
            step += 1;
            epoch_loss += loss;
            batches += 1;
        }
        observe(epoch, epoch_loss / batches.max(1) as f64);
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_use_population_variance() {
        assert_eq!(sample_stats(&[2.0, 4.0]).unwrap(), (3.0, 1.0));
        assert_eq!(sample_stats(&[5.0]).unwrap(), (5.0, 0.0));
        assert_eq!(sample_stats(&[1.0, -1.0, 1.0, -1.0]).unwrap(), (0.0, 1.0));
        assert_eq!(sample_stats(&[]), Err(UncertaintyError::EmptySample));
    }

    #[test]
    fn wdropout_spot_values() {
        assert_eq!(wdropout_loss(&[0.0, 0.0], 0.0).unwrap(), 0.0);
        assert_eq!(wdropout_loss(&[1.0, -1.0], 0.0).unwrap(), 0.0);
        assert_eq!(wdropout_loss(&[1.0, 1.0], 0.0).unwrap(), 2.0);
        let expect = 1.0 + (1.0 - 2f64.sqrt()).powi(2);
        assert!((wdropout_loss(&[2.0, 0.0], 0.0).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 1.171_572_875).abs() < 1e-8);
        assert!(matches!(wdropout_loss(&[1.0], 0.0), Err(UncertaintyError::TooFewSamples { .. })));
    }

    #[test]
    fn wdropout_multi_sums_coordinates() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [1.0, 0.0]]).unwrap();
        let total = wdropout_loss_multi(&s, &[0.0, 0.0]).unwrap();
        assert!((total - (2.0 + 1.0 + (1.0 - 2f64.sqrt()).powi(2))).abs() < 1e-12);
    }

    #[test]
    fn ws2_closed_form() {
        assert_eq!(ws2_squared_gaussians(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(ws2_squared_gaussians(3.0, 1.0, 0.0, 1.0).unwrap(), 9.0);
        assert_eq!(ws2_squared_gaussians(0.0, 2.0, 0.0, 0.5).unwrap(), 2.25);
        assert_eq!(ws2_squared_gaussians(0.0, -1.0, 0.0, 1.0), Err(UncertaintyError::NegativeSigma));
    }

    #[test]
    fn nll_spot_values() {
        assert_eq!(gaussian_nll(1.0, 1.0, 1.0), 0.0);
        assert_eq!(gaussian_nll(0.0, 1.0, 2.0), 2.0);
        let e = core::f64::consts::E;
        assert!((gaussian_nll(0.0, e * e, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn predict_dropout_applies_lambda_to_variance() {
        let mut rng = SeededRng::new(1);
        let net = Mlp::new(&[1, 4, 1], Head::Point, 0.0, &mut rng).unwrap();
        let x = Matrix::column(&[0.1, -0.4]);
        let pred = predict_dropout(&net, &x, 10, 0.25, &mut rng).unwrap();
        assert!(pred.sigma.as_slice().iter().all(|&s| s == 0.5));
        assert!(matches!(predict_dropout(&net, &x, 1, 0.0, &mut rng), Err(UncertaintyError::TooFewSamples { .. })));
    }

    #[test]
    fn ensemble_moments() {
        let member =
            |mu: f64, s: f64| PredictiveDistribution::new(Matrix::column(&[mu]), Matrix::column(&[s])).unwrap();
        let de = predict_ensemble(&[member(0.0, 0.0), member(2.0, 0.0)], EnsembleKind::Mean).unwrap();
        assert_eq!((de.mu.get(0, 0), de.sigma.get(0, 0)), (1.0, 1.0));
        let mix = predict_ensemble(&[member(0.0, 1.0), member(2.0, 1.0)], EnsembleKind::Mixture).unwrap();
        assert_eq!(mix.mu.get(0, 0), 1.0);
        assert!((mix.sigma.get(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        let same = predict_ensemble(&[member(0.5, 0.7), member(0.5, 0.7)], EnsembleKind::Mixture).unwrap();
        assert!((same.sigma.get(0, 0) - 0.7).abs() < 1e-15);
        let same = predict_ensemble(&[member(0.5, 0.0), member(0.5, 0.0)], EnsembleKind::Mean).unwrap();
        assert_eq!(same.sigma.get(0, 0), 0.0);
        assert!(matches!(
            predict_ensemble(&[member(0.0, 0.0)], EnsembleKind::Mean),
            Err(UncertaintyError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()), Some(m));
        }
        assert_eq!(Method::parse("pu-de"), Some(Method::PuDe));
        assert_eq!(Method::parse("W-Dropout"), Some(Method::Wdropout));
        assert_eq!(Method::parse("swag"), None);
    }

    #[test]
    fn config_validation() {
        let mut c = MethodConfig::new(Method::Wdropout);
        assert!(c.validate().is_ok());
        c.train_samples = 1;
        assert!(c.validate().is_err());
        let mut c = MethodConfig::new(Method::Mc);
        c.lambda = -1.0;
        assert!(c.validate().is_err());
        let mut c = MethodConfig::new(Method::De);
        c.members = 1;
        assert!(c.validate().is_err());
    }
}
